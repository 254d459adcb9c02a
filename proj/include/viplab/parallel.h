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
// Thread-count control and deterministic RNG stream splitting.
//
// Every parallel kernel in the library has a serial twin with the same
// signature; both draw randomness before fanning out and reduce in a fixed
// order, so results never depend on the thread count.

#ifndef VIPLAB_PARALLEL_H_
#define VIPLAB_PARALLEL_H_

#include <cstdint>
#include <optional>
#include <random>

namespace viplab {

using Rng = std::mt19937_64;

enum class Exec { kSerial, kParallel };

// Flag value wins, then VIPLAB_THREADS, then the OpenMP default.
int resolve_threads(std::optional<int> flag);
void set_threads(int n);
int max_threads();

// splitmix64 of (master, stream): independent child seeds.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

inline Rng make_rng(std::uint64_t master, std::uint64_t stream) {
  return Rng(derive_seed(master, stream));
}

}  // namespace viplab

#endif  // VIPLAB_PARALLEL_H_
