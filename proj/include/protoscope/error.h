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

#ifndef PROTOSCOPE_ERROR_H_
#define PROTOSCOPE_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace protoscope {

enum class ErrorCode {
  kInvalidArgument,
  kUnreadableFile,
  kUnsupportedFormat,
  kDimensionMismatch,
  kOutOfBounds,
  kNoForeground,
  kBadMagic,
  kVersionMismatch,
  kTruncatedPayload,
  kNonFinite,
  kMalformed,
  kIoError,
};

std::string_view ErrorCodeName(ErrorCode code);

// All library failures are reported with this exception. The message starts
// with the lower-case code phrase (e.g. "dimension mismatch: ...").
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace protoscope

#endif  // PROTOSCOPE_ERROR_H_
