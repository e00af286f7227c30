// Copyright 2026 The IWR Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
#pragma once

#include <cstddef>
#include <functional>

namespace iwr {

/// Number of worker threads used by parallel loops when a caller passes 0.
/// Defaults to std::thread::hardware_concurrency().
unsigned default_thread_count();
void set_default_thread_count(unsigned threads);

/// Runs body(begin, end) over [0, count) split into fixed chunks of
/// chunk_size. Chunk boundaries do not depend on the thread count, so any
/// per-chunk computation is reproducible regardless of parallelism.
/// Exceptions thrown by body are rethrown on the calling thread.
void parallel_for_chunks(std::size_t count, std::size_t chunk_size,
                         const std::function<void(std::size_t, std::size_t)>& body,
                         unsigned threads = 0);

}  // namespace iwr
