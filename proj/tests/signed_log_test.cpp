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

#include <cmath>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "tdi/error.hpp"
#include "tdi/signed_log.hpp"

using tdi::SignedLogReal;
using tdi::testing::rel_err;

TEST_CASE("arithmetic matches doubles across the representable range") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> mantissa(1.0, 10.0);
  std::bernoulli_distribution negative(0.5);
  auto draw = [&](double lo_exp, double hi_exp) {
    const double e = std::uniform_real_distribution<double>(lo_exp, hi_exp)(rng);
    return (negative(rng) ? -1.0 : 1.0) * mantissa(rng) * std::pow(10.0, e);
  };
  for (int i = 0; i < 2000; ++i) {
    const double a = draw(-150, 150), b = draw(-150, 150);
    const auto sa = SignedLogReal::from_double(a), sb = SignedLogReal::from_double(b);
    CHECK(rel_err((sa * sb).to_double(), a * b) < 1e-12);
    CHECK(rel_err((sa / sb).to_double(), a / b) < 1e-12);
    // Cancelling sums lose relative accuracy in any representation, so each
    // operation is checked where its operands do not cancel.
    const bool apart = std::min(std::abs(a), std::abs(b)) < 0.5 * std::max(std::abs(a), std::abs(b));
    if (std::signbit(a) == std::signbit(b) || apart) {
      CHECK(rel_err((sa + sb).to_double(), a + b) < 1e-12);
    }
    if (std::signbit(a) != std::signbit(b) || apart) {
      CHECK(rel_err((sa - sb).to_double(), a - b) < 1e-12);
    }
  }
}

TEST_CASE("zero handling") {
  const auto z = SignedLogReal::zero();
  const auto x = SignedLogReal::from_double(-2.5);
  CHECK(z.is_zero());
  CHECK(z.log_magnitude() == -INFINITY);
  CHECK((x + z) == x);
  CHECK((x - x).is_zero());
  CHECK((x * z).is_zero());
  CHECK(SignedLogReal::from_double(0.0).sign() == 0);
  CHECK_THROWS_AS(x / z, tdi::Error);
}

TEST_CASE("values beyond double range keep their magnitude") {
  const auto tiny = SignedLogReal::from_log(-5000.0);
  const auto sq = tiny * tiny;
  CHECK(sq.log_magnitude() == doctest::Approx(-10000.0));
  CHECK(sqrt(sq).log_magnitude() == doctest::Approx(-5000.0));
  CHECK(sq.to_double() == 0.0);
}

TEST_CASE("ordering, sqrt and clamp") {
  const auto a = SignedLogReal::from_double(-3.0);
  const auto b = SignedLogReal::from_double(2.0);
  CHECK(a < b);
  CHECK(!(b < a));
  CHECK(clamp_nonnegative(a).is_zero());
  CHECK(clamp_nonnegative(b) == b);
  CHECK(sqrt(SignedLogReal::from_double(0.016)).to_double() == doctest::Approx(std::sqrt(0.016)));
  CHECK_THROWS_AS(sqrt(a), tdi::Error);
  CHECK(abs(a).to_double() == doctest::Approx(3.0));
}
