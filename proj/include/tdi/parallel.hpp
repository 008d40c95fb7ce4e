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

#include <cstddef>
#include <functional>

namespace tdi {

/// Resolves 0 to the hardware concurrency (at least 1).
std::size_t resolve_threads(std::size_t requested);

/// Calls body(begin, end) on contiguous, disjoint index blocks covering
/// [0, n). Blocks are fixed by (n, threads), so results written per index
/// do not depend on scheduling. The first exception thrown is rethrown.
void parallel_blocks(std::size_t n, std::size_t threads,
                     const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace tdi
