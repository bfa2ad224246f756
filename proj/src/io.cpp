#include "soliton/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>

#include "soliton/errors.hpp"

namespace soliton::io {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json vector_to_json(const VectorXd& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

VectorXd vector_from_json(const json& a) {
  VectorXd v(a.size());
  for (size_t i = 0; i < a.size(); ++i) v[i] = a[i].get<double>();
  return v;
}

}  // namespace

json shrinker_to_json(const ShrinkerSurface& S) {
  json j;
  j["ambient_dim"] = S.ambient_dim;
  j["symmetry"] = S.is_round() ? "RoundSphere" : "RotationalProfile";
  j["normal_orientation"] = "Outward";
  j["residual_tol"] = S.residual_tol;
  j["residual_achieved"] = S.residual_achieved;
  if (S.is_round()) {
    j["radius"] = S.radius;
    j["y_center"] = S.y_center;
  } else {
    json nodes = json::array();
    for (int i = 0; i < S.prof.size(); ++i)
      nodes.push_back(json::array({S.prof.w[i], S.prof.y[i]}));
    j["nodes"] = nodes;
    j["inner_intercept"] = S.inner_intercept;
    j["outer_intercept"] = S.outer_intercept;
  }
  return j;
}

ShrinkerSurface shrinker_from_json(const json& j) {
  const std::string sym = j.at("symmetry").get<std::string>();
  if (sym == "RoundSphere") {
    ShrinkerSurface S = make_round_sphere(j.at("ambient_dim").get<int>());
    S.residual_tol = j.value("residual_tol", 1e-8);
    S.y_center = j.value("y_center", 0.0);
    if (S.y_center != 0.0) S = translated_along_axis(S, 0.0);  // recompute residual
    return S;
  }
  if (sym != "RotationalProfile") throw DomainError("shrinker_from_json: unknown symmetry");
  // profile surfaces are reconstructed by re-shooting at matching resolution;
  // stored nodes are used to validate the reconstruction
  const json& nodes = j.at("nodes");
  ShootingConfig cfg;
  cfg.nodes = static_cast<int>(nodes.size());
  cfg.residual_tol = j.value("residual_tol", 1e-6);
  ShrinkerSurface S = shoot_angenent_torus(j.at("ambient_dim").get<int>(), cfg);
  double worst = 0.0;
  for (int i = 0; i < S.prof.size(); ++i) {
    worst = std::max(worst, std::abs(S.prof.w[i] - nodes[i][0].get<double>()) +
                                std::abs(S.prof.y[i] - nodes[i][1].get<double>()));
  }
  if (worst > 1e-6)
    throw NumericError("shrinker_from_json: stored profile does not match the reconstruction");
  return S;
}

json spectrum_to_json(const SpectrumData& spec) {
  json j;
  j["ambient_dim"] = spec.ambient_dim;
  j["index_I"] = spec.index_I;
  j["mu1"] = spec.mu1;
  j["mu_minus"] = spec.mu_minus;
  j["sigma"] = spec.sigma;
  j["mu_max"] = spec.mu_max;
  json modes = json::array();
  for (const auto& md : spec.modes) {
    json m;
    m["mu"] = md.mu;
    m["fourier_mode"] = md.fourier_k;
    m["parity"] = md.parity;
    m["eigenfunction"] = vector_to_json(md.profile_fn);
    modes.push_back(std::move(m));
  }
  j["modes"] = modes;
  j["weights"] = vector_to_json(spec.weights);
  return j;
}

void save_end_field(const std::filesystem::path& dir, const std::string& stem,
                    const EndField& u) {
  std::filesystem::create_directories(dir);
  json meta;
  meta["surface_kind"] = (u.sgrid.kind == GridKind::CircleFull)
                             ? "circle"
                             : (u.sgrid.kind == GridKind::ProfileRotational ? "torus_rotational"
                                                                            : "round_constant");
  meta["surface_nodes"] = u.rows();
  meta["z_lo"] = u.zgrid.z[0];
  meta["z_hi"] = u.zgrid.z[u.cols() - 1];
  meta["z_count"] = u.cols();
  meta["graph_bound"] = u.graph_bound;
  meta["active_from"] = u.active_from;
  write_json(dir / (stem + ".json"), meta);

  std::vector<std::string> names;
  std::vector<VectorXd> cols;
  names.push_back("z");
  cols.push_back(u.zgrid.z);
  for (int i = 0; i < u.rows(); ++i) {
    names.push_back("u" + std::to_string(i));
    cols.push_back(u.values.row(i).transpose());
  }
  write_csv(dir / (stem + ".csv"), names, cols);
}

EndField load_end_field(const std::filesystem::path& dir, const std::string& stem,
                        const ShrinkerSurface& S) {
  const json meta = read_json(dir / (stem + ".json"));
  EndField u;
  const std::string kind = meta.at("surface_kind").get<std::string>();
  const int m = meta.at("surface_nodes").get<int>();
  if (kind == "circle")
    u.sgrid = make_circle_grid(S, m);
  else if (kind == "torus_rotational")
    u.sgrid = make_profile_rotational_grid(S);
  else
    u.sgrid = make_round_constant_grid(S);
  u.zgrid = LogGrid(meta.at("z_lo").get<double>(), meta.at("z_hi").get<double>(),
                    meta.at("z_count").get<int>());
  u.graph_bound = meta.value("graph_bound", 0.0);
  u.active_from = meta.value("active_from", 0);
  auto cols = read_csv(dir / (stem + ".csv"));
  if (static_cast<int>(cols.size()) != m + 1)
    throw DomainError("load_end_field: column count mismatch");
  u.values.resize(m, cols[0].second.size());
  for (int i = 0; i < m; ++i) u.values.row(i) = cols[i + 1].second.transpose();
  return u;
}

void write_csv(const std::filesystem::path& file, const std::vector<std::string>& names,
               const std::vector<VectorXd>& cols) {
  if (names.size() != cols.size()) throw DomainError("write_csv: names/cols mismatch");
  std::ofstream out(file);
  if (!out) throw DomainError("write_csv: cannot open " + file.string());
  for (size_t c = 0; c < names.size(); ++c) out << (c ? "," : "") << names[c];
  out << "\n";
  const auto rows = cols.empty() ? 0 : cols[0].size();
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << fmt_double(cols[c][r]);
    out << "\n";
  }
}

std::vector<std::pair<std::string, VectorXd>> read_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DomainError("read_csv: cannot open " + file.string());
  std::string line;
  if (!std::getline(in, line)) throw DomainError("read_csv: empty file");
  std::vector<std::pair<std::string, std::vector<double>>> cols;
  size_t pos = 0;
  while (pos <= line.size()) {
    const size_t comma = line.find(',', pos);
    const size_t end = (comma == std::string::npos) ? line.size() : comma;
    cols.emplace_back(line.substr(pos, end - pos), std::vector<double>{});
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    size_t p = 0;
    for (size_t c = 0; c < cols.size(); ++c) {
      const size_t comma = line.find(',', p);
      const size_t end = (comma == std::string::npos) ? line.size() : comma;
      cols[c].second.push_back(std::stod(line.substr(p, end - p)));
      p = (comma == std::string::npos) ? line.size() + 1 : comma + 1;
    }
  }
  std::vector<std::pair<std::string, VectorXd>> out;
  for (auto& [name, vals] : cols)
    out.emplace_back(name, Eigen::Map<VectorXd>(vals.data(), vals.size()));
  return out;
}

void write_text(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file);
  if (!out) throw DomainError("write_text: cannot open " + file.string());
  out << text;
}

json read_json(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DomainError("read_json: cannot open " + file.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DomainError("read_json: " + file.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& file, const json& j) {
  std::ofstream out(file);
  if (!out) throw DomainError("write_json: cannot open " + file.string());
  out << j.dump(2) << "\n";
}

std::string config_hash(const json& j) {
  const std::string s = j.dump();
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

}  // namespace soliton::io
