#pragma once

// File formats for the module interfaces: distribution / overlay / trace /
// dataset / Wigner CSVs and record / report JSON.  All numbers go through one
// formatter so a (config, seed) pair reproduces files byte for byte.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "homsim/empirical.hpp"
#include "homsim/homodyne.hpp"
#include "homsim/phasebayes.hpp"
#include "homsim/tomography.hpp"

namespace homsim {

using nlohmann::json;

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open output file " + path.string());
  return out;
}

// columns: dn, x, prob, density
inline void write_distribution_csv(const std::filesystem::path& path,
                                   const QuadratureDistribution& dist,
                                   const std::vector<std::string>& header_comments = {}) {
  std::ofstream out = open_output(path);
  for (const auto& c : header_comments) out << "# " << c << "\n";
  out << "dn,x,prob,density\n";
  for (int i = 0; i < dist.prob.size(); ++i) {
    const int dn = dist.grid.dn_min + i;
    out << dn << ',' << format_double(dist.grid.x(dn)) << ','
        << format_double(dist.prob[i]) << ',' << format_double(dist.density[i]) << "\n";
  }
}

// columns: x, model_density, empirical_density  (the Fig. 2 overlay)
inline void write_overlay_csv(const std::filesystem::path& path,
                              const QuadratureDistribution& model,
                              const EmpiricalMeasure& emp,
                              const std::vector<std::string>& header_comments = {}) {
  if (!(model.grid == emp.grid())) throw GridMismatchError("overlay grids differ");
  std::ofstream out = open_output(path);
  for (const auto& c : header_comments) out << "# " << c << "\n";
  out << "x,model_density,empirical_density\n";
  const Eigen::VectorXd ed = emp.density();
  for (int i = 0; i < model.prob.size(); ++i) {
    out << format_double(model.grid.x(model.grid.dn_min + i)) << ','
        << format_double(model.density[i]) << ',' << format_double(ed[i]) << "\n";
  }
}

// columns: step, circ_mean, circ_std
inline void write_trace_csv(const std::filesystem::path& path, const PosteriorTrace& trace,
                            const std::vector<std::string>& header_comments = {}) {
  std::ofstream out = open_output(path);
  for (const auto& c : header_comments) out << "# " << c << "\n";
  out << "step,circ_mean,circ_std\n";
  for (std::size_t i = 0; i < trace.circ_mean.size(); ++i)
    out << (i + 1) << ',' << format_double(trace.circ_mean[i]) << ','
        << format_double(trace.circ_std[i]) << "\n";
}

inline json record_to_json(const DetectionRecord& record) {
  json j;
  j["seed"] = record.seed;
  j["alpha"] = record.alpha;
  j["signal"] = record.signal;
  j["prior"] = record.prior;
  j["grid"] = {{"dn_min", record.grid.dn_min},
               {"dn_max", record.grid.dn_max},
               {"lo_amplitude", record.grid.lo_amplitude}};
  j["outcomes"] = record.outcomes;
  return j;
}

inline DetectionRecord record_from_json(const json& j) {
  DetectionRecord r;
  r.seed = j.at("seed").get<std::uint64_t>();
  r.alpha = j.at("alpha").get<double>();
  r.signal = j.value("signal", "");
  r.prior = j.value("prior", "");
  r.grid.dn_min = j.at("grid").at("dn_min").get<int>();
  r.grid.dn_max = j.at("grid").at("dn_max").get<int>();
  r.grid.lo_amplitude = j.at("grid").at("lo_amplitude").get<double>();
  r.outcomes = j.at("outcomes").get<std::vector<int>>();
  return r;
}

// columns: dn, x, frequency, density (one file per phase shift)
inline void write_dataset_block_csv(const std::filesystem::path& path,
                                    const QuadratureGrid& grid, const AngleBlock& block,
                                    const std::vector<std::string>& header_comments = {}) {
  std::ofstream out = open_output(path);
  for (const auto& c : header_comments) out << "# " << c << "\n";
  out << "# theta=" << format_double(block.theta) << " samples=" << block.total << "\n";
  out << "dn,x,frequency,density\n";
  for (int i = 0; i < block.prob.size(); ++i) {
    const int dn = grid.dn_min + i;
    out << dn << ',' << format_double(grid.x(dn)) << ',' << format_double(block.prob[i])
        << ',' << format_double(block.prob[i] / grid.dx()) << "\n";
  }
}

// matrix CSV with a header line carrying bounds and spacing
inline void write_wigner_csv(const std::filesystem::path& path, const WignerGrid& w,
                             const std::vector<std::string>& header_comments = {}) {
  std::ofstream out = open_output(path);
  for (const auto& c : header_comments) out << "# " << c << "\n";
  out << "# xmin=" << format_double(-w.extent) << " xmax=" << format_double(w.extent)
      << " pmin=" << format_double(-w.extent) << " pmax=" << format_double(w.extent)
      << " step=" << format_double(w.step()) << " points=" << w.points << "\n";
  for (int ix = 0; ix < w.points; ++ix) {
    for (int ip = 0; ip < w.points; ++ip) {
      if (ip) out << ',';
      out << format_double(w.values(ix, ip));
    }
    out << "\n";
  }
}

inline json report_to_json(const DiscriminationReport& rep) {
  json scores = json::array();
  for (const auto& s : rep.scores)
    scores.push_back({{"reference", s.name},
                      {"overlap", s.overlap},
                      {"normalized", s.normalized},
                      {"rotation", s.rotation}});
  return json{{"verdict", rep.verdict},
              {"seed", rep.seed},
              {"scores", scores},
              {"wigner_integral", rep.wigner_integral}};
}

}  // namespace homsim
