// Copyright 2026 The TDI-SPN Authors.
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
#include <string>

#include "tdi/logmath.hpp"

namespace tdi {

/// Real number stored as sign and natural-log magnitude, so that moments of
/// deep circuits neither underflow nor lose their sign.
class SignedLogReal {
 public:
  constexpr SignedLogReal() = default;

  static SignedLogReal zero() { return {}; }
  static SignedLogReal from_log(double log_magnitude, int sign = 1);
  static SignedLogReal from_double(double value);

  int sign() const { return sign_; }
  /// -inf when the value is zero.
  double log_magnitude() const { return sign_ == 0 ? kNegInf : log_mag_; }
  bool is_zero() const { return sign_ == 0; }
  double to_double() const;

  SignedLogReal operator-() const;
  SignedLogReal& operator+=(const SignedLogReal& other);
  SignedLogReal& operator-=(const SignedLogReal& other);
  SignedLogReal& operator*=(const SignedLogReal& other);
  /// Division by zero yields a Parameter error.
  SignedLogReal& operator/=(const SignedLogReal& other);

  friend SignedLogReal operator+(SignedLogReal a, const SignedLogReal& b) { return a += b; }
  friend SignedLogReal operator-(SignedLogReal a, const SignedLogReal& b) { return a -= b; }
  friend SignedLogReal operator*(SignedLogReal a, const SignedLogReal& b) { return a *= b; }
  friend SignedLogReal operator/(SignedLogReal a, const SignedLogReal& b) { return a /= b; }

  friend bool operator==(const SignedLogReal& a, const SignedLogReal& b) {
    return a.sign_ == b.sign_ && (a.sign_ == 0 || a.log_mag_ == b.log_mag_);
  }
  friend bool operator<(const SignedLogReal& a, const SignedLogReal& b);
  friend bool operator<=(const SignedLogReal& a, const SignedLogReal& b) { return !(b < a); }

 private:
  std::int8_t sign_ = 0;
  double log_mag_ = kNegInf;
};

SignedLogReal abs(const SignedLogReal& x);
/// Square root of a non-negative value; negative input yields a Parameter error.
SignedLogReal sqrt(const SignedLogReal& x);
/// Largest of x and 0.
SignedLogReal clamp_nonnegative(const SignedLogReal& x);

}  // namespace tdi
