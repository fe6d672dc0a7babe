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

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace kucofs {

/// File system error codes. The numeric values travel over the message
/// rings, so new codes are only ever appended.
enum class Errc : std::uint32_t {
  kOk = 0,
  kNotFound,
  kExists,
  kNotADirectory,
  kIsADirectory,
  kNotEmpty,
  kInvalidArgument,
  kNameTooLong,
  kBadFd,
  kOutOfSpace,
  kProtectionFault,
  kLeaseViolation,
  kStaleHandle,
  kLogFull,
  kMetadataFull,
  kCorruptSuperblock,
  kFileTooLarge,
  kInconsistent,
  kIo,
  kSizeTooSmall,
  kStaleRelease,
  kCorruptSlot,
};

std::string_view errc_name(Errc code);

class BadResultAccess : public std::logic_error {
 public:
  explicit BadResultAccess(Errc code)
      : std::logic_error(std::string("bad result access: ") + std::string(errc_name(code))), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

/// Value-or-error return type. `E` defaults to `Errc`; operations with a
/// richer failure payload (e.g. protection faults) use their own type.
template <typename T, typename E = Errc>
class [[nodiscard]] Result {
 public:
  Result(T value) : v_(std::in_place_index<0>, std::move(value)) {}
  Result(E error) : v_(std::in_place_index<1>, std::move(error)) {}

  bool ok() const { return v_.index() == 0; }
  explicit operator bool() const { return ok(); }

  const E& error() const { return std::get<1>(v_); }

  T& value() & {
    check();
    return std::get<0>(v_);
  }
  const T& value() const& {
    check();
    return std::get<0>(v_);
  }
  T&& value() && {
    check();
    return std::get<0>(std::move(v_));
  }

  T& operator*() & { return value(); }
  const T& operator*() const& { return value(); }
  T* operator->() { return &value(); }
  const T* operator->() const { return &value(); }

 private:
  void check() const {
    if (!ok()) {
      if constexpr (std::is_same_v<E, Errc>) {
        throw BadResultAccess(error());
      } else {
        throw std::logic_error("bad result access");
      }
    }
  }

  std::variant<T, E> v_;
};

template <typename E>
class [[nodiscard]] Result<void, E> {
 public:
  Result() = default;
  Result(E error) : error_(std::move(error)) {}

  bool ok() const { return !error_.has_value(); }
  explicit operator bool() const { return ok(); }
  const E& error() const { return *error_; }

 private:
  std::optional<E> error_;
};

/// `Errc`-returning operations that carry no value.
using Status = Result<void, Errc>;

/// Collapses a Status into its code (kOk on success).
inline Errc code_of(const Status& s) { return s.ok() ? Errc::kOk : s.error(); }

inline Status status_from(Errc code) {
  if (code == Errc::kOk) return {};
  return code;
}

}  // namespace kucofs
