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

#include "tdi/signed_log.hpp"

#include <cmath>

#include "tdi/error.hpp"

namespace tdi {

SignedLogReal SignedLogReal::from_log(double log_magnitude, int sign) {
  SignedLogReal r;
  if (sign == 0 || log_magnitude == kNegInf) return r;
  r.sign_ = static_cast<std::int8_t>(sign > 0 ? 1 : -1);
  r.log_mag_ = log_magnitude;
  return r;
}

SignedLogReal SignedLogReal::from_double(double value) {
  if (value == 0.0) return {};
  return from_log(std::log(std::abs(value)), value > 0 ? 1 : -1);
}

double SignedLogReal::to_double() const {
  return sign_ == 0 ? 0.0 : sign_ * std::exp(log_mag_);
}

SignedLogReal SignedLogReal::operator-() const {
  SignedLogReal r = *this;
  r.sign_ = static_cast<std::int8_t>(-r.sign_);
  return r;
}

SignedLogReal& SignedLogReal::operator+=(const SignedLogReal& other) {
  if (other.sign_ == 0) return *this;
  if (sign_ == 0) return *this = other;
  if (sign_ == other.sign_) {
    log_mag_ = log_add_exp(log_mag_, other.log_mag_);
    return *this;
  }
  // Opposite signs: the larger magnitude keeps its sign.
  double hi = log_mag_, lo = other.log_mag_;
  int s = sign_;
  if (lo > hi) {
    std::swap(hi, lo);
    s = other.sign_;
  }
  if (hi == lo) return *this = SignedLogReal{};
  log_mag_ = hi + std::log1p(-std::exp(lo - hi));
  sign_ = static_cast<std::int8_t>(s);
  return *this;
}

SignedLogReal& SignedLogReal::operator-=(const SignedLogReal& other) {
  return *this += -other;
}

SignedLogReal& SignedLogReal::operator*=(const SignedLogReal& other) {
  if (sign_ == 0 || other.sign_ == 0) return *this = SignedLogReal{};
  sign_ = static_cast<std::int8_t>(sign_ * other.sign_);
  log_mag_ += other.log_mag_;
  return *this;
}

SignedLogReal& SignedLogReal::operator/=(const SignedLogReal& other) {
  if (other.sign_ == 0) throw Error(ErrorKind::kParameter, "signed-log division by zero");
  if (sign_ == 0) return *this;
  sign_ = static_cast<std::int8_t>(sign_ * other.sign_);
  log_mag_ -= other.log_mag_;
  return *this;
}

bool operator<(const SignedLogReal& a, const SignedLogReal& b) {
  if (a.sign_ != b.sign_) return a.sign_ < b.sign_;
  if (a.sign_ == 0) return false;
  return a.sign_ > 0 ? a.log_mag_ < b.log_mag_ : a.log_mag_ > b.log_mag_;
}

SignedLogReal abs(const SignedLogReal& x) {
  return x.sign() < 0 ? -x : x;
}

SignedLogReal sqrt(const SignedLogReal& x) {
  if (x.sign() < 0) throw Error(ErrorKind::kParameter, "square root of a negative value");
  return SignedLogReal::from_log(0.5 * x.log_magnitude(), x.sign());
}

SignedLogReal clamp_nonnegative(const SignedLogReal& x) {
  return x.sign() < 0 ? SignedLogReal{} : x;
}

}  // namespace tdi
