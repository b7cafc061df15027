#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace mktsim::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Entry point shared by the executable and the tests. `args` excludes argv[0].
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// "0..19", "3,5,8" or a mix ("0..4,10"). Throws ConfigInvalid on duplicates or junk.
std::vector<std::uint64_t> parse_seed_list(std::string_view text);

/// Worker count for sweeps: MARKET_SIM_THREADS when set and positive, else the
/// hardware concurrency.
unsigned sweep_threads();

}  // namespace mktsim::cli
