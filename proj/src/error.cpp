// Copyright 2026 The instmatch Authors.
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

#include "instmatch/error.hpp"

namespace instmatch {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDimMismatch: return "DimMismatch";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kEmptyForeground: return "EmptyForeground";
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kDegenerateBatch: return "DegenerateBatch";
    case ErrorCode::kInvalidBox: return "InvalidBox";
    case ErrorCode::kEmptyUnion: return "EmptyUnion";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kUnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::kTruncatedFile: return "TruncatedFile";
    case ErrorCode::kCorruptRecord: return "CorruptRecord";
    case ErrorCode::kDuplicateName: return "DuplicateName";
    case ErrorCode::kUnknownDtype: return "UnknownDtype";
    case ErrorCode::kMissingRecord: return "MissingRecord";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kConfig: return "Config";
  }
  return "Unknown";
}

}  // namespace instmatch
