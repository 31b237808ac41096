#include "mfc/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include "json.hpp"
#include <random>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include "mfc/errors.hpp"

namespace mfc {

using nlohmann::json;

InitialStates sample_initial_conditions(const InitialDistribution& init, int count,
                                        std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("count must be >= 1");
  const Eigen::Index d = init.mean.size();
  const Eigen::Index noisy = init.noisy_dims < 0 ? d : std::min<Eigen::Index>(init.noisy_dims, d);
  const double sd = std::sqrt(init.variance);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  InitialStates out(count, init.mean);
  for (auto& z : out)
    for (Eigen::Index i = 0; i < noisy; ++i) z[i] += sd * normal(rng);
  return out;
}

std::string format_double(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw std::invalid_argument("not a number: '" + std::string(text) + "'");
  return v;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void save_dual(const std::filesystem::path& path, const CoefficientArchive& archive) {
  const auto& a = archive.coefficients;
  json nodes = json::array();
  for (Eigen::Index k = 0; k < a.values.cols(); ++k) {
    json col = json::array();
    for (Eigen::Index i = 0; i < a.values.rows(); ++i) col.push_back(a.values(i, k));
    nodes.push_back(std::move(col));
  }
  json doc = {{"format", "mfc-coefficients/1"},
              {"grid_fingerprint", a.grid_fingerprint},
              {"map_fingerprint", a.map_fingerprint},
              {"config_hash", archive.config_hash},
              {"converged", archive.converged},
              {"outer_iterations", archive.outer_iterations},
              {"r", a.values.rows()},
              {"n", a.values.cols()},
              {"nodes", std::move(nodes)}};
  write_text(path, doc.dump(1) + "\n");
}

CoefficientArchive load_dual(const std::filesystem::path& path) {
  CoefficientArchive out;
  try {
    const json doc = json::parse(read_text(path));
    if (doc.at("format") != "mfc-coefficients/1")
      throw std::runtime_error("unsupported coefficient format");
    const auto r = doc.at("r").get<Eigen::Index>();
    const auto n = doc.at("n").get<Eigen::Index>();
    const json& nodes = doc.at("nodes");
    if (r < 1 || n < 1 || static_cast<Eigen::Index>(nodes.size()) != n)
      throw std::runtime_error("coefficient shape mismatch");
    auto& a = out.coefficients;
    a.values.resize(r, n);
    for (Eigen::Index k = 0; k < n; ++k) {
      if (static_cast<Eigen::Index>(nodes[k].size()) != r)
        throw std::runtime_error("coefficient shape mismatch");
      for (Eigen::Index i = 0; i < r; ++i) a.values(i, k) = nodes[k][i].get<double>();
    }
    a.grid_fingerprint = doc.at("grid_fingerprint").get<std::string>();
    a.map_fingerprint = doc.at("map_fingerprint").get<std::string>();
    out.config_hash = doc.at("config_hash").get<std::string>();
    out.converged = doc.at("converged").get<bool>();
    out.outer_iterations = doc.at("outer_iterations").get<int>();
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": malformed coefficient file: " + e.what());
  }
  return out;
}

CoefficientArchive load_dual(const std::filesystem::path& path, const ProblemSpec& spec) {
  CoefficientArchive out = load_dual(path);
  out.coefficients.check_compatible(spec);
  return out;
}

void save_feature_map(const std::filesystem::path& path, const FeatureMap& map) {
  write_text(path, map.to_json_string() + "\n");
}

FeatureMap load_feature_map(const std::filesystem::path& path) {
  return FeatureMap::from_json_string(read_text(path));
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header,
                     const std::string& config_hash)
    : path_(path), columns_(header.size()) {
  if (!config_hash.empty()) buffer_ += "# config_hash=" + config_hash + "\n";
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) buffer_ += ',';
    buffer_ += header[i];
  }
  buffer_ += '\n';
}

CsvWriter::~CsvWriter() {
  if (!closed_) {
    try {
      close();
    } catch (...) {
    }
  }
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) throw std::invalid_argument("csv row width mismatch");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) buffer_ += ',';
    buffer_ += cells[i];
  }
  buffer_ += '\n';
}

void CsvWriter::close() {
  closed_ = true;
  write_text(path_, buffer_);
}

void export_trajectories(const Rollout& rollout, const TimeGrid& grid,
                         const std::vector<std::string>& state_names,
                         const std::filesystem::path& path, const std::string& config_hash) {
  std::vector<std::string> header{"agent", "t"};
  header.insert(header.end(), state_names.begin(), state_names.end());
  CsvWriter csv(path, header, config_hash);
  for (std::size_t l = 0; l < rollout.states.size(); ++l) {
    const Trajectory& z = rollout.states[l];
    if (z.rows() != static_cast<Eigen::Index>(state_names.size()) || z.cols() != grid.nodes)
      throw std::invalid_argument("rollout shape does not match grid and state names");
    for (Eigen::Index k = 0; k < z.cols(); ++k) {
      std::vector<std::string> cells{std::to_string(l), format_double(grid.time(static_cast<int>(k)))};
      for (Eigen::Index i = 0; i < z.rows(); ++i) cells.push_back(format_double(z(i, k)));
      csv.row(cells);
    }
  }
  csv.close();
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

TrajectoryTable import_trajectories(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  TrajectoryTable table;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  if (line.rfind("# config_hash=", 0) == 0) {
    table.config_hash = line.substr(14);
    if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": missing header");
  }
  const auto header = split(line);
  if (header.size() < 3 || header[0] != "agent" || header[1] != "t")
    throw std::runtime_error(path.string() + ": bad trajectory header");
  table.state_names.assign(header.begin() + 2, header.end());
  const std::size_t d = table.state_names.size();

  std::vector<std::vector<std::vector<double>>> columns;  // agent -> node -> state
  std::vector<double> times;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != d + 2) throw std::runtime_error(path.string() + ": bad row width");
    const auto agent = static_cast<std::size_t>(std::stoul(cells[0]));
    if (agent == columns.size()) columns.emplace_back();
    if (agent + 1 != columns.size())
      throw std::runtime_error(path.string() + ": rows not in agent order");
    std::vector<double> state(d);
    for (std::size_t i = 0; i < d; ++i) state[i] = parse_double(cells[i + 2]);
    if (agent == 0) times.push_back(parse_double(cells[1]));
    columns.back().push_back(std::move(state));
  }
  table.times = times;
  for (const auto& nodes : columns) {
    if (nodes.size() != times.size())
      throw std::runtime_error(path.string() + ": agents have different node counts");
    Trajectory z(d, static_cast<Eigen::Index>(nodes.size()));
    for (std::size_t k = 0; k < nodes.size(); ++k)
      for (std::size_t i = 0; i < d; ++i) z(i, k) = nodes[k][i];
    table.rollout.states.push_back(std::move(z));
  }
  return table;
}

void write_history_csv(const SolveHistory& history, const std::filesystem::path& path,
                       const std::string& config_hash) {
  CsvWriter csv(path,
                {"iter", "primal_grad_norm", "dual_residual_max", "Jr_grad_norm", "Jr_value",
                 "wall_clock_s"},
                config_hash);
  for (const auto& h : history)
    csv.row({std::to_string(h.iter), format_double(h.primal_grad_norm),
             format_double(h.dual_residual_max), format_double(h.jr_grad_norm),
             format_double(h.jr_value), format_double(h.wall_clock_s)});
  csv.close();
}

}  // namespace mfc
