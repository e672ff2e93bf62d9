#include "dosegp/serialize.hpp"

#include <cstdio>
#include <fstream>

#include "dosegp/errors.hpp"

namespace dosegp {

json to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

// Missing keys and wrong types in user-supplied files are input errors, not
// internal failures; keep the library's exception taxonomy at the boundary.
template <typename Fn>
auto guard(const char* what, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw InputError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

Eigen::VectorXd vector_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw InputError(what + ": expected an array");
  Eigen::VectorXd v(j.size());
  for (size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw InputError(what + ": expected numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty())
    throw InputError(what + ": expected a non-empty array of rows");
  const size_t cols = j[0].is_array() ? j[0].size() : 0;
  Eigen::MatrixXd m(j.size(), cols);
  for (size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols)
      throw InputError(what + ": ragged rows");
    for (size_t c = 0; c < cols; ++c) {
      if (!j[i][c].is_number())
        throw InputError(what + ": expected numbers");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          j[i][c].get<double>();
    }
  }
  return m;
}

json to_json(const StandardizeMoments& m) {
  return {{"y_mean", m.y_mean},
          {"y_sd", m.y_sd},
          {"x_mean", m.x_mean},
          {"x_sd", m.x_sd}};
}

StandardizeMoments moments_from_json(const json& j) {
  return guard("standardization moments", [&] {
    StandardizeMoments m;
    m.y_mean = j.at("y_mean").get<double>();
    m.y_sd = j.at("y_sd").get<double>();
    m.x_mean = j.at("x_mean").get<double>();
    m.x_sd = j.at("x_sd").get<double>();
    return m;
  });
}

json to_json(const DoseResponsePrior& prior) {
  return {{"grid", to_json(prior.grid.levels)},
          {"mu", to_json(prior.mu)},
          {"cov", to_json(prior.cov)},
          {"n_obs", prior.n_obs},
          {"moments", to_json(prior.moments)}};
}

DoseResponsePrior prior_from_json(const json& j) {
  return guard("prior file", [&] {
    DoseResponsePrior p;
    p.grid.levels = vector_from_json(j.at("grid"), "prior grid");
    p.mu = vector_from_json(j.at("mu"), "prior mu");
    p.cov = matrix_from_json(j.at("cov"), "prior cov");
    p.n_obs = j.at("n_obs").get<Eigen::Index>();
    p.moments = moments_from_json(j.at("moments"));
    p.validate();
    return p;
  });
}

json to_json(const McmcSamples& samples) {
  return {{"grid", to_json(samples.grid.levels)},
          {"seed", samples.seed},
          {"iterations", samples.iterations},
          {"burn_in", samples.burn_in},
          {"thin", samples.thin},
          {"f_obs", to_json(samples.f_obs)},
          {"a", to_json(samples.a)},
          {"b", to_json(samples.b)},
          {"hyper", to_json(samples.hyper)}};
}

McmcSamples samples_from_json(const json& j) {
  return guard("samples file", [&] {
    McmcSamples s;
    s.grid.levels = vector_from_json(j.at("grid"), "samples grid");
    s.seed = j.at("seed").get<std::uint64_t>();
    s.iterations = j.at("iterations").get<int>();
    s.burn_in = j.at("burn_in").get<int>();
    s.thin = j.at("thin").get<int>();
    s.f_obs = matrix_from_json(j.at("f_obs"), "samples f_obs");
    s.a = matrix_from_json(j.at("a"), "samples a");
    s.b = matrix_from_json(j.at("b"), "samples b");
    s.hyper = matrix_from_json(j.at("hyper"), "samples hyper");
    return s;
  });
}

json to_json(const SyntheticProblem& p) {
  return {{"p", p.p},
          {"n", p.n},
          {"degree", p.degree},
          {"alpha", p.alpha},
          {"seed", p.seed},
          {"theta", to_json(p.theta)},
          {"beta", to_json(p.beta)},
          {"poly", to_json(p.poly)},
          {"x_mean_hat", p.x_mean_hat},
          {"x_var_hat", p.x_var_hat},
          {"sigma_x_sq", p.sigma_x_sq},
          {"sigma_y_sq", p.sigma_y_sq},
          {"noise_frac_x", p.noise_frac_x},
          {"noise_frac_y", p.noise_frac_y},
          {"expected_f_yz", p.expected_f_yz},
          {"rank_correlation", p.rank_correlation},
          {"rejections", p.rejections}};
}

SyntheticProblem problem_from_json(const json& j) {
  return guard("problem file", [&] {
    auto [problem, obs] = generate_problem(
        j.at("p").get<int>(), j.at("n").get<Eigen::Index>(),
        j.at("degree").get<int>(), j.at("alpha").get<double>(),
        j.at("seed").get<std::uint64_t>());
    (void)obs;
    const Eigen::VectorXd theta = vector_from_json(j.at("theta"), "theta");
    const Eigen::VectorXd poly = vector_from_json(j.at("poly"), "poly");
    if (!theta.isApprox(problem.theta, 1e-12) ||
        !poly.isApprox(problem.poly, 1e-12))
      throw InputError(
          "problem file does not match its seed; it was written by an "
          "incompatible generator");
    return problem;
  });
}

json to_json(const SemiSyntheticTruth& truth) {
  return {{"grid", to_json(truth.grid.levels)},
          {"f", to_json(truth.f)},
          {"noise_var", truth.noise_var},
          {"stratum", truth.stratum},
          {"rows", truth.rows}};
}

SemiSyntheticTruth truth_from_json(const json& j) {
  return guard("truth file", [&] {
    SemiSyntheticTruth t;
    t.grid.levels = vector_from_json(j.at("grid"), "truth grid");
    t.f = vector_from_json(j.at("f"), "truth f");
    t.noise_var = j.at("noise_var").get<double>();
    t.stratum = j.at("stratum").get<int>();
    t.rows = j.at("rows").get<Eigen::Index>();
    t.validate();
    return t;
  });
}

json to_json(const StudyCell& cell) {
  return {{"degree", cell.degree},
          {"alpha", cell.alpha},
          {"drop", cell.drop == DropMode::kRandom ? "random" : "adversarial"},
          {"m", cell.m_int},
          {"label", cell.label()}};
}

namespace {
json nan_safe(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}
}  // namespace

json to_json(const StudyResult& result) {
  json cells = json::array();
  for (const auto& cs : result.cells) {
    json methods;
    for (const auto& [name, agg] : cs.methods) {
      methods[name] = {{"e_mean", nan_safe(agg.e_mean)},
                       {"l_mean", nan_safe(agg.l_mean)},
                       {"e_diff_mean", nan_safe(agg.e_diff_mean)},
                       {"e_diff_t", nan_safe(agg.e_diff_t)},
                       {"e_diff_p", nan_safe(agg.e_diff_p)},
                       {"e_diff_significant", agg.e_diff_significant},
                       {"l_diff_mean", nan_safe(agg.l_diff_mean)},
                       {"l_excluded", agg.l_excluded},
                       {"n_used", agg.n_used}};
    }
    cells.push_back({{"cell", to_json(cs.cell)},
                     {"completed", cs.completed},
                     {"failed", cs.failed},
                     {"interventional_collapsed", cs.collapsed},
                     {"e_ours_mean", nan_safe(cs.e_ours_mean)},
                     {"l_ours_mean", nan_safe(cs.l_ours_mean)},
                     {"methods", methods}});
  }
  return {{"cells", cells},
          {"replications", result.config.replications},
          {"seed", result.config.seed}};
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << j.dump(2) << "\n";
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path + ": malformed JSON at byte " +
                     std::to_string(e.byte) + ": " + e.what());
  }
}

namespace {
void print_num(std::ofstream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf;
}
}  // namespace

void write_summary_csv(const std::string& path, const DoseGrid& grid,
                       const Eigen::VectorXd& mean,
                       const Eigen::VectorXd& variance) {
  if (mean.size() != grid.size() || variance.size() != grid.size())
    throw InputError("summary csv: size mismatch");
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << "dose,mean,variance\n";
  for (Eigen::Index t = 0; t < grid.size(); ++t) {
    print_num(out, grid.levels(t));
    out << ',';
    print_num(out, mean(t));
    out << ',';
    print_num(out, variance(t));
    out << "\n";
  }
}

void write_replications_csv(const std::string& path,
                            const StudyResult& result) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  // Column set fixed by the first successful replication.
  std::vector<std::string> methods;
  for (const auto& rec : result.replications) {
    if (rec.failed) continue;
    for (const auto& [k, v] : rec.e) methods.push_back(k);
    break;
  }
  out << "cell,label,rep,failed,interventional_collapsed";
  for (const auto& m : methods) out << ",E_" << m;
  for (const auto& m : methods) out << ",L_" << m;
  out << ",error\n";
  for (const auto& rec : result.replications) {
    out << rec.cell << ',' << result.config.cells[rec.cell].label() << ','
        << rec.rep << ',' << (rec.failed ? 1 : 0) << ','
        << (rec.interventional_collapsed ? 1 : 0);
    for (const auto& m : methods) {
      out << ',';
      if (!rec.failed && rec.e.count(m)) print_num(out, rec.e.at(m));
    }
    for (const auto& m : methods) {
      out << ',';
      if (!rec.failed && rec.l.count(m)) print_num(out, rec.l.at(m));
    }
    std::string err = rec.error;
    for (auto& ch : err)
      if (ch == ',' || ch == '\n') ch = ';';
    out << ',' << err << "\n";
  }
}

void write_history_csv(const std::string& path,
                       const std::vector<SelectionRecord>& history) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << "step,stratum,dose_index,dose,y,hyper_refresh\n";
  for (const auto& r : history) {
    out << r.step << ',' << r.stratum << ',' << r.dose_index << ',';
    print_num(out, r.dose);
    out << ',';
    print_num(out, r.y);
    out << ',' << (r.hyper_refresh ? 1 : 0) << "\n";
  }
}

}  // namespace dosegp
