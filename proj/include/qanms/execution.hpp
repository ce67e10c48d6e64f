// Copyright 2026 The qanms Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

namespace qanms {

/// Selects the OpenMP kernels or the serial reference path. Both produce
/// identical results; the serial path exists for testing and benchmarking.
enum class Execution { kSerial, kParallel };

/// Sets the OpenMP thread count for subsequent parallel kernels (no-op when
/// built without OpenMP). n == 0 keeps the runtime default.
void set_num_threads(int n);
int max_threads();

}  // namespace qanms
