#pragma once

#include <string>
#include <vector>

namespace vsensor::cli {

// Expands `--config FILE` (a flat JSON object such as {"epochs": 10,
// "model": "sage"}) into ordinary flags appended to `args`. Keys may use '_'
// or '-'; arrays become repeated values; true booleans become bare flags.
// Flags already on the command line win. Unreadable or malformed files throw
// std::invalid_argument; unknown keys surface later as unknown flags.
std::vector<std::string> expand_json_config(const std::vector<std::string>& args);

}  // namespace vsensor::cli
