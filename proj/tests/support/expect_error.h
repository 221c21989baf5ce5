/*
 * Copyright 2026 The Protoscope Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef PROTOSCOPE_TESTS_SUPPORT_EXPECT_ERROR_H_
#define PROTOSCOPE_TESTS_SUPPORT_EXPECT_ERROR_H_

#include <gtest/gtest.h>

#include <string>

#include "protoscope/error.h"

// Runs the statement and checks it throws protoscope::Error with the given
// code.
#define EXPECT_PROTOSCOPE_ERROR(code_value, ...)                              \
  do {                                                                        \
    try {                                                                     \
      __VA_ARGS__;                                                            \
      ADD_FAILURE() << "expected " #code_value " from " #__VA_ARGS__;         \
    } catch (const ::protoscope::Error& e_) {                                 \
      EXPECT_EQ(e_.code(), ::protoscope::ErrorCode::code_value) << e_.what(); \
    }                                                                         \
  } while (0)

#endif  // PROTOSCOPE_TESTS_SUPPORT_EXPECT_ERROR_H_
