// Copyright 2026 The Deletion Lab Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#ifndef DELETION_LAB_PARALLEL_H_
#define DELETION_LAB_PARALLEL_H_

#include <cstddef>
#include <functional>

namespace deletion_lab {

// Worker cap: DELETION_LAB_THREADS if set and positive, else hardware
// concurrency (at least 1).
int WorkerCount();

// Runs fn(i) for i in [0, n) on up to WorkerCount() threads. Results must be
// written to per-index slots by the caller. The first exception thrown (by
// lowest index) is rethrown after all workers finish.
void ParallelFor(size_t n, const std::function<void(size_t)>& fn,
                 int max_workers = 0);

}  // namespace deletion_lab

#endif  // DELETION_LAB_PARALLEL_H_
