#pragma once

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "quadnav/io.hpp"
#include "quadnav/ppo.hpp"

namespace quadnav {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitDivergence = 2;

inline constexpr const char* kMetricsVersionLine = "# quadnav metrics v1";

// Deterministic training log; wall-clock time lives in timing.csv.
std::string metrics_csv(const std::vector<TrainMetrics>& rows);
std::string metrics_csv_row(const TrainMetrics& m);
std::vector<TrainMetrics> parse_metrics_csv(const std::string& text);

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PlotOutput {
  std::string kind;  // "metrics" or "trajectory"
  std::string svg;
  std::string data_csv;  // exact subset of the input rows, two columns
};

// Line chart of env_steps vs mean_episode_return (metrics) or step vs
// normalized_distance (trajectory). At most max_points rows are kept,
// always including the first and the last. Throws SchemaError naming the
// first missing column.
PlotOutput make_plot(const CsvTable& table, std::size_t max_points = 500);

// Entry point behind the quadnav executable. args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace quadnav
