// qmm: command-line front end for the decision solvers.
//
// Every command reads JSON, writes one JSON report (or a table with
// --output table) and exits with 0 on success, 2 on bad input, 3 when an
// iteration or round budget ran out (the report is still written) and 4 on
// any other failure.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "qmm/bayes.hpp"
#include "qmm/io.hpp"
#include "qmm/lfp.hpp"
#include "qmm/model.hpp"
#include "qmm/oracles.hpp"
#include "qmm/restricted.hpp"

namespace {

using qmm::io::Json;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitBudget = 3;
constexpr int kExitInternal = 4;

struct Common {
  std::string output = "json";
  std::string out;
  bool timing = false;
};

struct Report {
  std::string command;
  Json input = nullptr;
  Json options = Json::object();
  std::string status = "ok";
  Json result = Json::object();
};

std::vector<std::string> g_arguments;

// ---------------------------------------------------------------- rendering

std::string table_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

std::string table_scalar(const Json& j) {
  if (j.is_number_float()) return table_number(j.get<double>());
  if (j.is_string()) return j.get<std::string>();
  return j.dump();
}

bool is_complex_pair(const Json& j) { return j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number(); }

std::string table_complex(const Json& j) {
  const double re = j[0].get<double>();
  const double im = j[1].get<double>();
  if (im == 0.0) return table_number(re);
  return table_number(re) + (im < 0 ? "-" : "+") + table_number(std::abs(im)) + "i";
}

void render(std::string& out, const std::string& key, const Json& j, int depth) {
  const std::string pad(static_cast<std::size_t>(2 * depth), ' ');
  const bool scalar_row = j.is_array() && std::all_of(j.begin(), j.end(), [](const Json& e) {
                            return !e.is_structured() || is_complex_pair(e);
                          });
  if (!j.is_structured() || (scalar_row && !j.empty())) {
    out += pad + key + ":";
    if (j.is_array()) {
      for (const auto& e : j) out += "  " + (is_complex_pair(e) ? table_complex(e) : table_scalar(e));
    } else {
      out += " " + table_scalar(j);
    }
    out += '\n';
    return;
  }
  out += pad + key + ":\n";
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) render(out, k, v, depth + 1);
  } else {
    for (std::size_t i = 0; i < j.size(); ++i) render(out, "[" + std::to_string(i) + "]", j[i], depth + 1);
  }
}

// A report that cannot be written is a failure even when the solve worked.
void write_text(const Common& c, const std::string& text) {
  if (c.out.empty()) {
    std::cout << text << std::flush;
    if (!std::cout) throw std::runtime_error("writing to standard output failed");
    return;
  }
  std::ofstream f(c.out, std::ios::binary);
  if (!f) throw qmm::ValidationError("cannot open output file", c.out);
  f << text;
  f.flush();
  if (!f) throw std::runtime_error("writing " + c.out + " failed");
}

int emit(const Report& r, const Common& c, double seconds, int code) {
  Json doc{{"command", r.command}, {"arguments", g_arguments}, {"input", r.input},
           {"options", r.options}, {"status", r.status}, {"result", r.result}};
  if (c.timing) doc["wall_time_seconds"] = seconds;
  std::string text;
  if (c.output == "table") {
    for (const auto& [k, v] : doc.items()) render(text, k, v, 0);
  } else {
    text = qmm::io::to_text(doc);
  }
  write_text(c, text);
  return code;
}

// ---------------------------------------------------------------- helpers

struct Loaded {
  qmm::io::ProblemFile pf;
  Json input;
};

Loaded load_problem(const std::string& path) {
  const std::string text = qmm::io::read_file(path);
  return {qmm::io::parse_problem(text), Json{{"path", path}, {"sha256", qmm::io::sha256_hex(text)}}};
}

qmm::Povm load_povm(const std::string& path, const qmm::DecisionProblem& p, Json& input) {
  const std::string text = qmm::io::read_file(path);
  input["povm"] = Json{{"path", path}, {"sha256", qmm::io::sha256_hex(text)}};
  qmm::Povm m = qmm::io::parse_povm(text, p.dim());
  qmm::check_compatible(p, m);
  return m;
}

// Prior from the flag, else from the problem file, else none.
std::optional<qmm::Prior> pick_prior(const std::string& flag, const qmm::io::ProblemFile& pf, Json& options) {
  if (!flag.empty()) {
    qmm::Prior pi = qmm::io::parse_prior_list(flag);
    if (pi.size() != pf.problem.num_states())
      throw qmm::ValidationError("expected " + std::to_string(pf.problem.num_states()) + " weights", "--prior");
    options["prior_source"] = "flag";
    return pi;
  }
  if (pf.prior) {
    options["prior_source"] = "file";
    return pf.prior;
  }
  return std::nullopt;
}

Json reals(std::span<const double> v) { return qmm::io::reals_to_json(v); }

const char* class_name(const qmm::PovmClass& cls) {
  return std::holds_alternative<qmm::AllPovms>(cls) ? "all" : "convex_hull";
}

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Json lfp_json(const qmm::DecisionProblem& p, const qmm::LfpSolution& s) {
  return Json{{"prior", reals(s.prior.weights())},
              {"value", s.value},
              {"lower", s.lower},
              {"upper", s.upper},
              {"gap", s.gap},
              {"rounds", s.rounds},
              {"cuts_used", s.cuts_used},
              {"risk", reals(qmm::risk_vector(p, s.minimax_povm).values)},
              {"minimax_povm", qmm::io::povm_to_json(s.minimax_povm)}};
}

// ---------------------------------------------------------------- commands

struct RiskArgs {
  std::string file, povm, prior;
};

int run_risk(const RiskArgs& a, const Common& c) {
  const auto t0 = std::chrono::steady_clock::now();
  Loaded in = load_problem(a.file);
  Report r{"risk", in.input};
  const qmm::Povm m = load_povm(a.povm, in.pf.problem, r.input);
  const auto pi = pick_prior(a.prior, in.pf, r.options);
  const qmm::RiskVector risk = qmm::risk_vector(in.pf.problem, m);
  r.result["risk"] = reals(risk.values);
  r.result["worst_case"] = qmm::worst_case_risk(risk);
  if (pi) {
    r.result["prior"] = reals(pi->weights());
    r.result["average"] = qmm::average_risk(risk, *pi);
  }
  return emit(r, c, elapsed(t0), kExitOk);
}

struct BayesArgs {
  std::string file, prior;
  double tol = qmm::BayesOptions{}.tol;
  int max_iter = qmm::BayesOptions{}.max_iter;
};

int run_bayes(const BayesArgs& a, const Common& c) {
  const auto t0 = std::chrono::steady_clock::now();
  Loaded in = load_problem(a.file);
  Report r{"bayes", in.input};
  auto pi = pick_prior(a.prior, in.pf, r.options);
  if (!pi) {
    pi = qmm::Prior::uniform(in.pf.problem.num_states());
    r.options["prior_source"] = "uniform";
  }
  r.options["tol"] = a.tol;
  r.options["max_iter"] = a.max_iter;
  r.options["class"] = class_name(in.pf.cls);
  qmm::BayesOptions opts;
  opts.tol = a.tol;
  opts.max_iter = a.max_iter;

  auto fill = [&](const qmm::RestrictedBayesSolution& s) {
    r.result["prior"] = reals(pi->weights());
    r.result["primal"] = s.primal;
    r.result["dual_bound"] = s.dual_bound;
    r.result["gap"] = s.gap;
    r.result["iterations"] = s.iterations;
    if (std::holds_alternative<qmm::ConvexHull>(in.pf.cls)) r.result["weights"] = reals(s.weights);
    r.result["povm"] = qmm::io::povm_to_json(s.povm);
  };
  try {
    fill(qmm::solve_bayes_restricted(in.pf.problem, *pi, in.pf.cls, opts));
    return emit(r, c, elapsed(t0), kExitOk);
  } catch (const qmm::MaxIterationsExceeded& e) {
    const auto& b = e.best();
    fill({{1.0}, b.povm, b.primal, b.dual_bound, b.gap, b.iterations});
    r.status = "max_iterations";
    return emit(r, c, elapsed(t0), kExitBudget);
  }
}

struct LfpArgs {
  std::string file;
  double tol = qmm::LfpOptions{}.tol;
  int max_rounds = qmm::LfpOptions{}.max_rounds;
  int max_iter = qmm::LfpOptions{}.bayes_max_iter;
};

qmm::LfpOptions lfp_options(double tol, int max_rounds, int max_iter, Json& options) {
  qmm::LfpOptions o;
  o.tol = tol;
  o.max_rounds = max_rounds;
  o.bayes_max_iter = max_iter;
  options["tol"] = tol;
  options["max_rounds"] = max_rounds;
  options["max_iter"] = max_iter;
  return o;
}

int run_lfp(const LfpArgs& a, const Common& c) {
  const auto t0 = std::chrono::steady_clock::now();
  Loaded in = load_problem(a.file);
  Report r{"lfp", in.input};
  const qmm::LfpOptions o = lfp_options(a.tol, a.max_rounds, a.max_iter, r.options);
  r.options["class"] = class_name(in.pf.cls);
  try {
    r.result = lfp_json(in.pf.problem, qmm::find_lfp_restricted(in.pf.problem, in.pf.cls, o));
    return emit(r, c, elapsed(t0), kExitOk);
  } catch (const qmm::MaxRoundsExceeded& e) {
    r.result = lfp_json(in.pf.problem, e.best());
    r.status = "max_rounds";
    return emit(r, c, elapsed(t0), kExitBudget);
  }
}

struct CertifyArgs {
  std::string file, povm, prior;
};

int run_certify(const CertifyArgs& a, const Common& c) {
  const auto t0 = std::chrono::steady_clock::now();
  Loaded in = load_problem(a.file);
  Report r{"certify", in.input};
  const qmm::Povm m = load_povm(a.povm, in.pf.problem, r.input);
  const auto pi = pick_prior(a.prior, in.pf, r.options);
  if (!pi) throw qmm::ValidationError("a prior is required (flag or problem file)", "--prior");
  const qmm::MinimaxCertificate cert = qmm::certify_minimax(in.pf.problem, m, *pi);
  r.result["prior"] = reals(pi->weights());
  r.result["risk"] = reals(qmm::risk_vector(in.pf.problem, m).values);
  r.result["sup_risk"] = cert.sup_risk;
  r.result["avg_risk"] = cert.avg_risk;
  r.result["diff"] = cert.diff;
  return emit(r, c, elapsed(t0), kExitOk);
}

struct EqualityArgs {
  std::string file;
  double tol = qmm::LfpOptions{}.tol;
  int max_rounds = qmm::LfpOptions{}.max_rounds;
  int max_iter = qmm::LfpOptions{}.bayes_max_iter;
  std::size_t instances = 25;
  std::uint64_t seed = 1000;
  std::size_t max_dim = 4, max_states = 5, max_decisions = 4;
  unsigned jobs = 0;
};

Json witness_json(const qmm::DecisionProblem& p, const qmm::EqualityWitness& w) {
  return Json{{"dimension", p.dim()},          {"states", p.num_states()},
              {"decisions", p.num_decisions()}, {"lhs_upper", w.lhs_upper},
              {"rhs_lower", w.rhs_lower},       {"gap", w.gap},
              {"converged", w.converged},       {"rounds", w.solution.rounds},
              {"prior", reals(w.solution.prior.weights())}};
}

int run_equality(const EqualityArgs& a, const Common& c) {
  const auto t0 = std::chrono::steady_clock::now();
  Report r{"equality"};
  const qmm::LfpOptions o = lfp_options(a.tol, a.max_rounds, a.max_iter, r.options);
  Json rows = Json::array();
  bool all_converged = true;
  double max_gap = 0.0;
  auto account = [&](Json row, const qmm::EqualityWitness& w) {
    all_converged = all_converged && w.converged;
    max_gap = std::max(max_gap, w.gap);
    rows.push_back(std::move(row));
  };

  if (!a.file.empty()) {
    Loaded in = load_problem(a.file);
    r.input = in.input;
    const qmm::EqualityWitness w = qmm::verify_minimax_equality(in.pf.problem, o);
    account(witness_json(in.pf.problem, w), w);
  } else {
    r.options["instances"] = a.instances;
    r.options["seed"] = a.seed;
    r.options["max_dim"] = a.max_dim;
    r.options["max_states"] = a.max_states;
    r.options["max_decisions"] = a.max_decisions;
    // Generate up front so bad limits fail before any thread starts.
    std::vector<qmm::DecisionProblem> problems;
    for (std::size_t k = 0; k < a.instances; ++k)
      problems.push_back(qmm::batch_problem(k, a.seed, a.max_dim, a.max_states, a.max_decisions));
    const unsigned jobs = a.jobs ? a.jobs : std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::optional<qmm::EqualityWitness>> results(problems.size());
    for (std::size_t start = 0; start < problems.size(); start += jobs) {
      std::vector<std::future<qmm::EqualityWitness>> wave;
      const std::size_t stop = std::min(problems.size(), start + jobs);
      for (std::size_t k = start; k < stop; ++k)
        wave.push_back(std::async(std::launch::async, [&, k] { return qmm::verify_minimax_equality(problems[k], o); }));
      for (std::size_t k = start; k < stop; ++k) results[k] = wave[k - start].get();
    }
    for (std::size_t k = 0; k < problems.size(); ++k) {
      Json row = witness_json(problems[k], *results[k]);
      row["seed"] = a.seed + k;
      account(std::move(row), *results[k]);
    }
  }
  r.result["all_converged"] = all_converged;
  r.result["max_gap"] = max_gap;
  r.result["instances"] = std::move(rows);
  if (!all_converged) r.status = "max_rounds";
  return emit(r, c, elapsed(t0), all_converged ? kExitOk : kExitBudget);
}

struct RandomArgs {
  std::size_t dim = 2, states = 2, decisions = 2;
  std::uint64_t seed = 0;
};

// Emits a problem file, not a report, so the output feeds the other commands.
int run_random(const RandomArgs& a, const Common& c) {
  if (a.dim > qmm::kMaxRandomDim)
    throw qmm::ValidationError("must be at most " + std::to_string(qmm::kMaxRandomDim), "--dim");
  qmm::io::ProblemFile pf{qmm::random_problem(a.dim, a.states, a.decisions, a.seed), std::nullopt,
                            qmm::AllPovms{}};
  const std::string json = qmm::io::emit_problem(pf);
  if (c.output == "table") {
    std::string text;
    render(text, "problem", qmm::io::problem_to_json(pf), 0);
    write_text(c, text);
  } else {
    write_text(c, json);
  }
  return kExitOk;
}

struct OracleArgs {
  std::string file, prior;
  int resolution = 200;
};

bool is_zero_one_pair(const qmm::DecisionProblem& p) {
  if (p.num_states() != 2 || p.num_decisions() != 2) return false;
  const auto& w = p.loss();
  return w(0, 0) == 0.0 && w(1, 1) == 0.0 && w(0, 1) == 1.0 && w(1, 0) == 1.0;
}

int run_oracle(const OracleArgs& a, const Common& c) {
  const auto t0 = std::chrono::steady_clock::now();
  Loaded in = load_problem(a.file);
  Report r{"oracle", in.input};
  auto pi = pick_prior(a.prior, in.pf, r.options);
  if (!pi) {
    pi = qmm::Prior::uniform(in.pf.problem.num_states());
    r.options["prior_source"] = "uniform";
  }
  r.options["resolution"] = a.resolution;
  const auto& p = in.pf.problem;
  r.result["prior"] = reals(pi->weights());
  r.result["brute_force"] = qmm::brute_force_bayes(p, *pi, a.resolution);
  if (is_zero_one_pair(p)) r.result["helstrom"] = qmm::helstrom_bayes(p.family()[0], p.family()[1], (*pi)[0]);
  return emit(r, c, elapsed(t0), kExitOk);
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--output", c.output, "Output format")->check(CLI::IsMember({"json", "table"}));
  app->add_option("--out", c.out, "Write output to this file instead of stdout");
  app->add_flag("--timing", c.timing, "Include wall time in the report (breaks byte determinism)");
}

}  // namespace

int main(int argc, char** argv) {
  g_arguments.assign(argv + 1, argv + argc);

  CLI::App app{"Bayes and minimax measurements for finite quantum decision problems"};
  app.require_subcommand(1);
  Common common;

  RiskArgs risk;
  auto* c_risk = app.add_subcommand("risk", "Risk vector of a POVM");
  c_risk->add_option("problem", risk.file, "Problem file")->required();
  c_risk->add_option("--povm", risk.povm, "POVM file")->required();
  c_risk->add_option("--prior", risk.prior, "Comma-separated prior; adds the average risk");
  add_common(c_risk, common);

  BayesArgs bayes;
  auto* c_bayes = app.add_subcommand("bayes", "Bayes POVM for a prior, with certified gap");
  c_bayes->add_option("problem", bayes.file, "Problem file")->required();
  c_bayes->add_option("--prior", bayes.prior, "Comma-separated prior (default: file prior, else uniform)");
  c_bayes->add_option("--tol", bayes.tol, "Target duality gap")->capture_default_str()->check(CLI::PositiveNumber);
  c_bayes->add_option("--max-iter", bayes.max_iter, "Iteration budget")->capture_default_str()->check(CLI::PositiveNumber);
  add_common(c_bayes, common);

  LfpArgs lfp;
  auto* c_lfp = app.add_subcommand("lfp", "Least favorable prior and near-minimax POVM");
  c_lfp->add_option("problem", lfp.file, "Problem file")->required();
  c_lfp->add_option("--tol", lfp.tol, "Target bracket width")->capture_default_str()->check(CLI::PositiveNumber);
  c_lfp->add_option("--max-rounds", lfp.max_rounds, "Cutting-plane round budget")->capture_default_str()->check(CLI::PositiveNumber);
  c_lfp->add_option("--max-iter", lfp.max_iter, "Iteration budget of each Bayes step")->capture_default_str()->check(CLI::PositiveNumber);
  add_common(c_lfp, common);

  CertifyArgs certify;
  auto* c_cert = app.add_subcommand("certify", "Worst-case minus average risk of a POVM under a prior");
  c_cert->add_option("problem", certify.file, "Problem file")->required();
  c_cert->add_option("--povm", certify.povm, "POVM file")->required();
  c_cert->add_option("--prior", certify.prior, "Comma-separated prior (default: file prior)");
  add_common(c_cert, common);

  EqualityArgs eq;
  auto* c_eq = app.add_subcommand("equality", "Bracket inf-sup against sup-inf on one file or a seeded batch");
  c_eq->add_option("problem", eq.file, "Problem file (omit for a random batch)");
  c_eq->add_option("--tol", eq.tol, "Target bracket width")->capture_default_str()->check(CLI::PositiveNumber);
  c_eq->add_option("--max-rounds", eq.max_rounds, "Cutting-plane round budget")->capture_default_str()->check(CLI::PositiveNumber);
  c_eq->add_option("--max-iter", eq.max_iter, "Iteration budget of each Bayes step")->capture_default_str()->check(CLI::PositiveNumber);
  c_eq->add_option("--instances", eq.instances, "Batch size")->capture_default_str();
  c_eq->add_option("--seed", eq.seed, "Seed of the first batch instance")->capture_default_str();
  c_eq->add_option("--max-dim", eq.max_dim, "Largest Hilbert space dimension in the batch")->capture_default_str()->check(CLI::Range(2, 8));
  c_eq->add_option("--max-states", eq.max_states, "Largest number of states in the batch")->capture_default_str()->check(CLI::Range(2, 64));
  c_eq->add_option("--max-decisions", eq.max_decisions, "Largest number of decisions in the batch")->capture_default_str()->check(CLI::Range(2, 64));
  c_eq->add_option("--jobs", eq.jobs, "Worker threads (default: hardware concurrency)");
  add_common(c_eq, common);

  RandomArgs rnd;
  auto* c_rnd = app.add_subcommand("random", "Seeded random problem file");
  c_rnd->add_option("--dim", rnd.dim, "Hilbert space dimension")->required()->check(CLI::PositiveNumber);
  c_rnd->add_option("--states", rnd.states, "Number of states")->required()->check(CLI::PositiveNumber);
  c_rnd->add_option("--decisions", rnd.decisions, "Number of decisions")->required()->check(CLI::PositiveNumber);
  c_rnd->add_option("--seed", rnd.seed, "Random seed")->required();
  add_common(c_rnd, common);

  OracleArgs oracle;
  auto* c_orc = app.add_subcommand("oracle", "Grid-search Bayes risk of a qubit two-decision problem");
  c_orc->add_option("problem", oracle.file, "Problem file")->required();
  c_orc->add_option("--prior", oracle.prior, "Comma-separated prior (default: file prior, else uniform)");
  c_orc->add_option("--resolution", oracle.resolution, "Grid points per unit half-width")->capture_default_str()->check(CLI::PositiveNumber);
  add_common(c_orc, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (c_risk->parsed()) return run_risk(risk, common);
    if (c_bayes->parsed()) return run_bayes(bayes, common);
    if (c_lfp->parsed()) return run_lfp(lfp, common);
    if (c_cert->parsed()) return run_certify(certify, common);
    if (c_eq->parsed()) return run_equality(eq, common);
    if (c_rnd->parsed()) return run_random(rnd, common);
    if (c_orc->parsed()) return run_oracle(oracle, common);
  } catch (const qmm::ValidationError& e) {
    std::cerr << "qmm: invalid input: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "qmm: error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}
