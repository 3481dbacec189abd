// Copyright 2026 The Prefrank Authors.
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

#ifndef PREFRANK_SEEDS_H_
#define PREFRANK_SEEDS_H_

#include <cstdint>
#include <random>
#include <string_view>

namespace prefrank {

using Rng = std::mt19937_64;

// Derives an independent stage seed from a master seed and a stage name.
// Stable across runs and platforms (FNV-1a over the name, SplitMix64 mix).
std::uint64_t DeriveSeed(std::uint64_t master, std::string_view stage);

}  // namespace prefrank

#endif  // PREFRANK_SEEDS_H_
