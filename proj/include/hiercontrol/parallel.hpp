#pragma once

#include <functional>

namespace hiercontrol {

/// Worker count from HIERCONTROL_THREADS (default 1).
int thread_count();

/// Run body(i) for i in [0, count). Work is split into contiguous blocks, so the
/// results do not depend on the thread count as long as body(i) only writes slot i.
void parallel_for(int count, const std::function<void(int)>& body);

}  // namespace hiercontrol
