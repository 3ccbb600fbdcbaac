#pragma once

#include <string>

namespace zoomrl {

// System prompt for the glance-then-zoom interaction. `per_call_budget` fills
// the frame-budget constraint; the default of 16 reproduces the canonical text.
std::string reasoning_system_prompt(int per_call_budget = 16);

// Expert-side prompt used when constructing corrected (reflection) interactions.
std::string reflection_system_prompt(int per_call_budget = 16);

}  // namespace zoomrl
