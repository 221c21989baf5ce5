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

#include "protoscope/error.h"

namespace protoscope {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
      return "invalid argument";
    case ErrorCode::kUnreadableFile:
      return "unreadable file";
    case ErrorCode::kUnsupportedFormat:
      return "unsupported format";
    case ErrorCode::kDimensionMismatch:
      return "dimension mismatch";
    case ErrorCode::kOutOfBounds:
      return "out of bounds";
    case ErrorCode::kNoForeground:
      return "no foreground";
    case ErrorCode::kBadMagic:
      return "bad magic";
    case ErrorCode::kVersionMismatch:
      return "version mismatch";
    case ErrorCode::kTruncatedPayload:
      return "truncated payload";
    case ErrorCode::kNonFinite:
      return "non-finite value";
    case ErrorCode::kMalformed:
      return "malformed";
    case ErrorCode::kIoError:
      return "io error";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(ErrorCodeName(code)) +
                         (detail.empty() ? "" : ": " + detail)),
      code_(code) {}

}  // namespace protoscope
