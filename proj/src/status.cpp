// Copyright 2026 The kucofs Authors
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

#include "kucofs/status.hpp"

namespace kucofs {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::kOk: return "ok";
    case Errc::kNotFound: return "not found";
    case Errc::kExists: return "exists";
    case Errc::kNotADirectory: return "not a directory";
    case Errc::kIsADirectory: return "is a directory";
    case Errc::kNotEmpty: return "directory not empty";
    case Errc::kInvalidArgument: return "invalid argument";
    case Errc::kNameTooLong: return "name too long";
    case Errc::kBadFd: return "bad file descriptor";
    case Errc::kOutOfSpace: return "out of space";
    case Errc::kProtectionFault: return "protection fault";
    case Errc::kLeaseViolation: return "lease violation";
    case Errc::kStaleHandle: return "stale handle";
    case Errc::kLogFull: return "log full";
    case Errc::kMetadataFull: return "metadata segment too small";
    case Errc::kCorruptSuperblock: return "corrupt superblock";
    case Errc::kFileTooLarge: return "file too large";
    case Errc::kInconsistent: return "inconsistent snapshot";
    case Errc::kIo: return "i/o error";
    case Errc::kSizeTooSmall: return "size too small";
    case Errc::kStaleRelease: return "stale release";
    case Errc::kCorruptSlot: return "corrupt lock slot";
  }
  return "unknown";
}

}  // namespace kucofs
