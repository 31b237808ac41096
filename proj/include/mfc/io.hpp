#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "mfc/problem.hpp"

namespace mfc {

/// N draws of mean + sqrt(variance) * xi on the first noisy_dims components,
/// generated agent by agent from one stream seeded with `seed`.
InitialStates sample_initial_conditions(const InitialDistribution& init, int count,
                                        std::uint64_t seed);

/// Shortest decimal string that parses back to the same double.
std::string format_double(double value);

/// Parses a full-precision decimal; throws std::invalid_argument on junk.
double parse_double(std::string_view text);

struct CoefficientArchive {
  DualCoefficients coefficients;
  std::string config_hash;
  bool converged = false;
  int outer_iterations = 0;
};

void save_dual(const std::filesystem::path& path, const CoefficientArchive& archive);

/// Reads an archive without checking it against a problem.
CoefficientArchive load_dual(const std::filesystem::path& path);

/// Reads an archive and verifies grid and feature-map fingerprints; throws
/// IncompatibleArtifact naming the first mismatched field.
CoefficientArchive load_dual(const std::filesystem::path& path, const ProblemSpec& spec);

void save_feature_map(const std::filesystem::path& path, const FeatureMap& map);
FeatureMap load_feature_map(const std::filesystem::path& path);

/// One row per (agent, node) in lexicographic order under the header
/// agent,t,<state names>. A non-empty config hash is written first as a
/// "# config_hash=" comment line.
void export_trajectories(const Rollout& rollout, const TimeGrid& grid,
                         const std::vector<std::string>& state_names,
                         const std::filesystem::path& path,
                         const std::string& config_hash = {});

struct TrajectoryTable {
  std::vector<std::string> state_names;
  std::vector<double> times;  // per node
  Rollout rollout;
  std::string config_hash;
};

TrajectoryTable import_trajectories(const std::filesystem::path& path);

/// iter,primal_grad_norm,dual_residual_max,Jr_grad_norm,Jr_value,wall_clock_s
void write_history_csv(const SolveHistory& history, const std::filesystem::path& path,
                       const std::string& config_hash = {});

/// Minimal CSV writer: header, rows of preformatted cells, optional hash line.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header,
            const std::string& config_hash = {});
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void row(const std::vector<std::string>& cells);
  void close();

 private:
  std::filesystem::path path_;
  std::string buffer_;
  std::size_t columns_;
  bool closed_ = false;
};

/// Reads a whole text file; throws std::runtime_error naming the path.
std::string read_text(const std::filesystem::path& path);
/// Writes a whole text file; throws std::runtime_error naming the path.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace mfc
