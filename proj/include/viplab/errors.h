// Copyright 2026 The viplab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VIPLAB_ERRORS_H_
#define VIPLAB_ERRORS_H_

#include <stdexcept>
#include <string>

namespace viplab {

enum class FormatErrorCode {
  kIo,
  kBadMagic,
  kTruncated,
  kSizeMismatch,
  kCountMismatch,
  kBadHeader,
  kEmpty,
};

const char* to_string(FormatErrorCode code);

// Raised by the checkpoint and dataset readers/writers.
class FormatError : public std::runtime_error {
 public:
  FormatError(FormatErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code) {}
  FormatErrorCode code() const { return code_; }

 private:
  FormatErrorCode code_;
};

inline const char* to_string(FormatErrorCode code) {
  switch (code) {
    case FormatErrorCode::kIo: return "io error";
    case FormatErrorCode::kBadMagic: return "bad magic";
    case FormatErrorCode::kTruncated: return "truncated";
    case FormatErrorCode::kSizeMismatch: return "size mismatch";
    case FormatErrorCode::kCountMismatch: return "count mismatch";
    case FormatErrorCode::kBadHeader: return "bad header";
    case FormatErrorCode::kEmpty: return "empty dataset";
  }
  return "format error";
}

}  // namespace viplab

#endif  // VIPLAB_ERRORS_H_
