#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "graphsplit/fusedlasso.hpp"

namespace graphsplit {

using json = nlohmann::json;

struct ParseError : Error {
  using Error::Error;
};

inline std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline json matrix_to_json(const Matrix& A) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < A.cols(); ++j) row.push_back(A(i, j));
    rows.push_back(row);
  }
  return rows;
}

inline json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

inline Matrix matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw ParseError(std::string(name) + ": expected " + std::to_string(rows) + " rows");
  Matrix A(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[i];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ParseError(std::string(name) + ": row " + std::to_string(i) + " must have " +
                       std::to_string(cols) + " entries");
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!row[c].is_number()) throw ParseError(std::string(name) + ": entries must be numbers");
      A(i, c) = row[c].get<double>();
      if (!std::isfinite(A(i, c))) throw ParseError(std::string(name) + ": entries must be finite");
    }
  }
  return A;
}

inline Vector vector_from_json(const json& j, Eigen::Index size, const char* name) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != size)
    throw ParseError(std::string(name) + ": expected " + std::to_string(size) + " entries");
  Vector v(size);
  for (Eigen::Index i = 0; i < size; ++i) {
    if (!j[i].is_number()) throw ParseError(std::string(name) + ": entries must be numbers");
    v[i] = j[i].get<double>();
  }
  return v;
}

inline json scheme_to_json(const CoefficientScheme& s) {
  json j;
  j["n"] = s.n;
  j["m"] = s.m;
  j["r"] = s.r;
  j["p"] = s.p;
  j["gamma"] = s.gamma;
  j["theta"] = s.theta;
  j["M"] = matrix_to_json(s.M);
  j["N"] = matrix_to_json(s.N);
  j["D_diag"] = vector_to_json(s.D);
  j["E_diag"] = vector_to_json(s.E);
  j["H"] = matrix_to_json(s.H);
  j["K"] = matrix_to_json(s.K);
  j["P"] = matrix_to_json(s.P);
  j["Q"] = matrix_to_json(s.Q);
  j["R"] = matrix_to_json(s.R);
  if (s.family) j["family"] = *s.family;
  return j;
}

inline CoefficientScheme scheme_from_json(const json& j) {
  try {
    CoefficientScheme s;
    auto get_int = [&](const char* k) {
      if (!j.contains(k) || !j[k].is_number_integer()) throw ParseError(std::string("missing integer field ") + k);
      return j[k].get<int>();
    };
    s.n = get_int("n");
    s.m = get_int("m");
    s.r = get_int("r");
    s.p = get_int("p");
    if (s.n < 1 || s.m < 1 || s.r < 0 || s.p < 0) throw ParseError("sizes out of range");
    if (!j.contains("gamma") || !j["gamma"].is_number()) throw ParseError("missing number field gamma");
    s.gamma = j["gamma"].get<double>();
    s.theta = j.value("theta", 1.0);
    auto need = [&](const char* k) -> const json& {
      if (!j.contains(k)) throw ParseError(std::string("missing field ") + k);
      return j[k];
    };
    s.M = matrix_from_json(need("M"), s.n, s.m, "M");
    s.N = matrix_from_json(need("N"), s.n, s.n, "N");
    s.D = vector_from_json(need("D_diag"), s.n, "D_diag");
    s.E = vector_from_json(need("E_diag"), s.r, "E_diag");
    s.H = matrix_from_json(need("H"), s.n, s.r, "H");
    s.K = matrix_from_json(need("K"), s.r, s.n, "K");
    s.P = matrix_from_json(need("P"), s.n, s.p, "P");
    s.Q = matrix_from_json(need("Q"), s.n, s.p, "Q");
    s.R = matrix_from_json(need("R"), s.p, s.n, "R");
    if (j.contains("family")) s.family = j["family"].get<std::string>();
    s.check_shapes();
    return s;
  } catch (const json::exception& e) {
    throw ParseError(e.what());
  } catch (const DimensionError& e) {
    throw ParseError(e.what());
  }
}

inline json graph_to_json(const GraphSpec& g) {
  auto edges = [](const std::vector<Edge>& list) {
    json out = json::array();
    for (const auto& e : sorted_edges(list)) out.push_back({e.i + 1, e.j + 1, e.w});
    return out;
  };
  return {{"n", g.n}, {"edges", edges(g.edges)}, {"subgraph_edges", edges(g.subgraph_edges)}};
}

inline GraphSpec graph_from_json(const json& j) {
  try {
    GraphSpec g;
    g.n = j.at("n").get<int>();
    auto edges = [&](const json& list) {
      std::vector<Edge> out;
      for (const auto& e : list) {
        if (!e.is_array() || e.size() != 3) throw ParseError("edges are [i, j, w] triples");
        int a = e[0].get<int>(), b = e[1].get<int>();
        double w = e[2].get<double>();
        if (a > b) std::swap(a, b);
        out.push_back({a - 1, b - 1, w});
      }
      return out;
    };
    g.edges = edges(j.at("edges"));
    g.subgraph_edges = j.contains("subgraph_edges") ? edges(j["subgraph_edges"]) : g.edges;
    return g;
  } catch (const json::exception& e) {
    throw ParseError(e.what());
  }
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

inline std::string matrix_csv(const Matrix& A) {
  std::string out;
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      if (j) out += ',';
      out += fmt17(A(i, j));
    }
    out += '\n';
  }
  return out;
}

inline std::string vector_csv(const Vector& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) out += fmt17(v[i]) + "\n";
  return out;
}

inline std::vector<std::vector<double>> read_csv_numbers(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ParseError(path.string() + ": bad number '" + cell + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// meta.json + A.csv (stacked rows in original order) + b.csv + x_true.csv
inline void save_instance(const FusedLassoInstance& inst, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto [A, b] = inst.stacked();
  Matrix A_orig(A.rows(), A.cols());
  Vector b_orig(b.size());
  int row = 0;
  for (const auto& part : inst.partition)
    for (int idx : part) {
      A_orig.row(idx) = A.row(row);
      b_orig[idx] = b[row];
      ++row;
    }
  json meta;
  meta["n_agents"] = inst.n_agents;
  meta["m"] = inst.m();
  meta["d"] = inst.d;
  meta["seed"] = inst.seed;
  meta["noise_var"] = inst.noise_var;
  meta["k_nonzero"] = inst.k_nonzero;
  meta["mu"] = inst.mu;
  meta["nu"] = inst.nu;
  meta["partition"] = inst.partition;
  write_text_file(dir / "meta.json", meta.dump(2) + "\n");
  write_text_file(dir / "A.csv", matrix_csv(A_orig));
  write_text_file(dir / "b.csv", vector_csv(b_orig));
  write_text_file(dir / "x_true.csv", vector_csv(inst.x_true));
}

inline FusedLassoInstance load_instance(const std::filesystem::path& dir) {
  json meta = read_json_file(dir / "meta.json");
  try {
    FusedLassoInstance inst;
    inst.n_agents = meta.at("n_agents").get<int>();
    inst.d = meta.at("d").get<Eigen::Index>();
    inst.seed = meta.value("seed", std::uint64_t{0});
    inst.noise_var = meta.value("noise_var", 0.0);
    inst.k_nonzero = meta.value("k_nonzero", 0);
    inst.mu = meta.at("mu").get<std::vector<double>>();
    inst.nu = meta.at("nu").get<std::vector<double>>();
    inst.partition = meta.at("partition").get<std::vector<std::vector<int>>>();
    auto A = read_csv_numbers(dir / "A.csv");
    auto b = read_csv_numbers(dir / "b.csv");
    auto xt = read_csv_numbers(dir / "x_true.csv");
    if (A.size() != b.size()) throw ParseError("A.csv and b.csv disagree in row count");
    inst.x_true = Vector::Zero(inst.d);
    if (static_cast<Eigen::Index>(xt.size()) == inst.d)
      for (Eigen::Index i = 0; i < inst.d; ++i) inst.x_true[i] = xt[i].at(0);
    for (const auto& part : inst.partition) {
      Matrix Ai(part.size(), inst.d);
      Vector bi(part.size());
      for (std::size_t r = 0; r < part.size(); ++r) {
        const auto& src = A.at(part[r]);
        if (static_cast<Eigen::Index>(src.size()) != inst.d) throw ParseError("A.csv row has wrong length");
        for (Eigen::Index c = 0; c < inst.d; ++c) Ai(r, c) = src[c];
        bi[r] = b.at(part[r]).at(0);
      }
      inst.A_blocks.push_back(std::move(Ai));
      inst.b_blocks.push_back(std::move(bi));
    }
    inst.validate();
    return inst;
  } catch (const json::exception& e) {
    throw ParseError(e.what());
  } catch (const std::out_of_range& e) {
    throw ParseError(std::string("instance files inconsistent: ") + e.what());
  }
}

inline std::string history_csv(const SolveReport& rep) {
  std::string out = "iter,residual,consensus_gap,objective,time_ms\n";
  for (const auto& h : rep.history)
    out += std::to_string(h.iter) + "," + fmt17(h.residual) + "," + fmt17(h.consensus_gap) + "," +
           fmt17(h.objective) + "," + fmt17(h.time_ms) + "\n";
  return out;
}

inline json final_state_json(const SolveReport& rep) {
  json x = vector_to_json(rep.final.x[0]);
  json s = json::array();
  for (const auto& blk : rep.dual_certificate.blocks()) s.push_back(vector_to_json(blk));
  return {{"x", x}, {"s", s}};
}

inline std::string hat_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

// Deterministic columns only; wall-clock time goes to timing_csv.
inline std::string grid_csv(const std::vector<GridRow>& rows) {
  std::string out = "family,gamma_hat,eta_hat,lambda_hat,iters_to_tol,final_residual,final_objective,status\n";
  for (const auto& r : rows)
    out += r.family + "," + fmt17(r.gamma_hat) + "," + fmt17(r.eta_hat) + "," + fmt17(r.lambda_hat) + "," +
           std::to_string(r.iters_to_tol) + "," + fmt17(r.final_residual) + "," +
           fmt17(r.final_objective) + "," + r.status + "\n";
  return out;
}

inline std::string timing_csv(const std::vector<GridRow>& rows) {
  std::string out = "family,gamma_hat,eta_hat,lambda_hat,wall_ms\n";
  for (const auto& r : rows)
    out += r.family + "," + fmt17(r.gamma_hat) + "," + fmt17(r.eta_hat) + "," + fmt17(r.lambda_hat) + "," +
           fmt17(r.wall_ms) + "\n";
  return out;
}

inline std::string curve_filename(const GridRow& r) {
  return r.family + "_" + hat_label(r.gamma_hat) + "_" + hat_label(r.eta_hat) + "_" +
         hat_label(r.lambda_hat) + ".csv";
}

inline std::string curve_csv(const GridRow& r) {
  std::string out = "iter,residual,objective\n";
  for (const auto& c : r.curve)
    out += std::to_string(c.iter) + "," + fmt17(c.residual) + "," + fmt17(c.objective) + "\n";
  return out;
}

}  // namespace graphsplit
