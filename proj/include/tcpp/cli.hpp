/**
 * @file cli.hpp
 * @brief Command dispatch for the `tcpp` executable.
 *
 *   tcpp <command> --market FILE [--claim FILE] [--at CUT] [--seed N] [--tol X]
 *                  [--good-deal-cap A] [--kind mme|calibrated|good-deal] [--format text|machine]
 *
 * Commands: price, check-tcpp, nfl, bounds, calibrate, extends, constrained, american.
 * Exit codes: 0 success or pass, 1 check failure, 2 input error.
 *
 * A CUT is `root`, `terminal`, `t=K` (all nodes at time K) or a comma list of node ids.
 * Claim files hold one of
 *   {"payoff": [{"node": id, "value": x}, ...]}   payoff on the listed stopping time
 *   {"terminal": [x per leaf, in leaf order]}
 *   {"process": [x per node id]}                  adapted payoff process (american)
 */
#pragma once

#include "tcpp/family.hpp"
#include "tcpp/market.hpp"
#include "tcpp/market_file.hpp"
#include "tcpp/nfl.hpp"
#include "tcpp/pricing.hpp"

#include "CLI11.hpp"

#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace tcpp::cli {

inline constexpr std::uint64_t kDefaultSeed = 1;

/// Key/value lines, either `key: value` or tab separated.
class Report {
 public:
  explicit Report(bool machine) : machine_(machine) {}

  void put(const std::string& key, const std::string& value) { lines_.emplace_back(key, value); }
  void put(const std::string& key, const char* value) { put(key, std::string(value)); }
  void put(const std::string& key, bool value) { put(key, value ? "true" : "false"); }
  void put(const std::string& key, std::size_t value) { put(key, std::to_string(value)); }
  void put(const std::string& key, double value) {
    std::ostringstream os;
    os << std::setprecision(machine_ ? 17 : 12) << value;
    put(key, os.str());
  }

  /// One line per check plus up to `limit` witnesses; returns whether it passed.
  bool check(const std::string& name, const CheckReport& r, std::size_t limit = 10) {
    put("check." + name, std::string(r.passed() ? "pass" : "fail") + " (" + std::to_string(r.cases) + " cases)");
    for (std::size_t k = 0; k < r.violations.size() && k < limit; ++k) {
      const auto& v = r.violations[k];
      std::ostringstream os;
      os << std::setprecision(12) << v.check << " at " << v.location << ", defect " << v.defect;
      if (!v.detail.empty()) os << ", " << v.detail;
      put("violation." + name, os.str());
    }
    if (r.violations.size() > limit)
      put("violation." + name, "... " + std::to_string(r.violations.size() - limit) + " more");
    return r.passed();
  }

  void print(std::ostream& out) const {
    for (const auto& [k, v] : lines_) out << k << (machine_ ? "\t" : ": ") << v << '\n';
  }

 private:
  bool machine_;
  std::vector<std::pair<std::string, std::string>> lines_;
};

struct Options {
  std::string command;
  std::string market;
  std::string claim;
  std::string at = "root";
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  std::optional<double> good_deal_cap;
  std::string kind = "mme";
  std::string format = "text";
};

inline StoppingTime parse_cut(const FiltrationTree& tree, const std::string& text) {
  if (text == "root") return StoppingTime::root(tree);
  if (text == "terminal") return StoppingTime::terminal(tree);
  if (text.rfind("t=", 0) == 0) {
    std::size_t t = 0;
    try {
      t = std::stoul(text.substr(2));
    } catch (const std::logic_error&) {
      throw Error(Errc::parse_error, "--at: '" + text + "' is not a time");
    }
    if (t > tree.horizon()) throw Error(Errc::invalid_stopping_time, "time " + text.substr(2) + " is past the horizon");
    return StoppingTime::at_time(tree, t);
  }
  std::vector<NodeId> cut;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      cut.push_back(std::stoul(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw Error(Errc::parse_error, "--at: '" + item + "' is not a node id");
    }
  }
  return StoppingTime::from_cut(tree, cut);
}

struct ClaimFile {
  std::optional<Claim> claim;
  std::optional<std::vector<double>> process;
};

inline ClaimFile parse_claim_file(const std::string& path, const FiltrationTree& tree) {
  const auto j = io::parse_json_text(io::read_file(path));
  ClaimFile out;
  if (const auto* p = io::optional_field(j, "payoff")) {
    out.claim = io::parse_claim_nodes(*p, tree, "/payoff");
  } else if (const auto* t = io::optional_field(j, "terminal")) {
    auto v = io::numbers(*t, "/terminal");
    if (v.size() != tree.num_leaves())
      io::fail(Errc::invariant_violation, "/terminal", "expected one value per leaf (" + std::to_string(tree.num_leaves()) + ")");
    out.claim = Claim(StoppingTime::terminal(tree), std::move(v));
  } else if (const auto* pr = io::optional_field(j, "process")) {
    auto v = io::numbers(*pr, "/process");
    if (v.size() != tree.size())
      io::fail(Errc::invariant_violation, "/process", "expected one value per node (" + std::to_string(tree.size()) + ")");
    out.process = std::move(v);
  } else {
    io::fail(Errc::parse_error, "", "claim file needs 'payoff', 'terminal' or 'process'");
  }
  return out;
}

inline bool is_input_error(Errc c) {
  switch (c) {
    case Errc::parse_error:
    case Errc::invariant_violation:
    case Errc::invalid_tree:
    case Errc::foreign_node:
    case Errc::invalid_stopping_time:
    case Errc::invalid_model:
    case Errc::precondition_violation:
    case Errc::mass_mismatch:
    case Errc::empty_list:
      return true;
    default:
      return false;
  }
}

namespace detail {

struct Context {
  const Options& opt;
  MarketFile market;
  NumericSettings settings;
  std::uint64_t seed;
  Report& report;

  const ScenarioModel& model() const {
    if (!market.model) throw Error(Errc::invariant_violation, "/model: this command needs a scenario model");
    return *market.model;
  }
  const Assets& assets() const {
    if (market.assets.empty()) throw Error(Errc::invariant_violation, "/assets: this command needs reference assets");
    return market.assets;
  }
  ClaimFile claim_file() const {
    if (opt.claim.empty()) throw Error(Errc::invariant_violation, "--claim is required for " + opt.command);
    return parse_claim_file(opt.claim, market.tree);
  }
  Claim claim() const {
    auto c = claim_file();
    if (!c.claim) throw Error(Errc::invariant_violation, "claim file holds a process; expected a payoff");
    return *c.claim;
  }
  double tol(double fallback) const { return opt.tol.value_or(fallback); }
};

inline std::string node_key(const std::string& prefix, NodeId v) { return prefix + ".node." + std::to_string(v); }

inline void put_claim(Report& r, const std::string& prefix, const Claim& x) {
  for (std::size_t k = 0; k < x.at.size(); ++k) r.put(node_key(prefix, x.at.cut()[k]), x.values[k]);
}

inline void put_measure(Report& r, const std::string& prefix, const FiltrationTree& tree, const Measure& m) {
  for (std::size_t k = 0; k < tree.num_leaves(); ++k) r.put(node_key(prefix, tree.leaves()[k]), m.density[k]);
}

inline int cmd_price(Context& c) {
  const auto x = c.claim();
  const auto sigma = parse_cut(c.market.tree, c.opt.at);
  const auto ba = bid_ask(c.model(), x, sigma);
  for (std::size_t k = 0; k < sigma.size(); ++k) {
    c.report.put(node_key("bid", sigma.cut()[k]), ba.bid.values[k]);
    c.report.put(node_key("ask", sigma.cut()[k]), ba.ask.values[k]);
  }
  return 0;
}

inline int cmd_check_tcpp(Context& c) {
  const auto& m = c.model();
  const auto& tree = m.tree();
  Rng rng(c.seed);
  bool ok = true;
  ok &= c.report.check("normalization", m.normalization_report(c.settings.zero_penalty_tol));
  ok &= c.report.check("non-degeneracy", check_nondegenerate(m));
  const auto samples = sample_axiom_cases(tree, rng, 200);
  const std::vector<double> lambdas{0.0, 0.3, 0.5, 1.0};
  ok &= c.report.check("axioms", check_axioms(m, samples, lambdas, c.tol(1e-12)));
  const auto chains = default_chains(tree, rng, 20);
  ok &= c.report.check("time-consistency", check_time_consistency(m, chains, rng, 10, c.tol(1e-9)));
  constexpr std::size_t member_cap = 256;
  const std::size_t members = m.selection_count(member_cap + 1);
  if (members <= member_cap) {
    ok &= c.report.check("cocycle", check_cocycle(family_from_model(m, member_cap), c.tol(1e-9)));
  } else {
    c.report.put("check.cocycle", "skipped (more than " + std::to_string(member_cap) + " selections)");
  }
  c.report.put("result", ok ? "pass" : "fail");
  return ok ? 0 : 1;
}

inline int cmd_nfl(Context& c) {
  const auto& m = c.model();
  const auto& tree = m.tree();
  Rng rng(c.seed);
  auto settings = c.settings;
  if (c.opt.tol) settings.check_tol = *c.opt.tol;
  const auto v = nfl_verdict(m, rng, {}, settings);
  c.report.put("verdict", v.no_free_lunch ? "no-free-lunch" : "free-lunch");
  c.report.put("multiperiod", v.multiperiod);
  c.report.put("static", v.static_nfl);
  c.report.put("measure", v.measure);
  c.report.put("sandwich", v.sandwich);
  if (v.no_free_lunch) {
    c.report.put("certificate", to_string(CertificateKind::zero_penalty_equivalent_measure));
    c.report.put("margin", v.measure_certificate.margin);
    put_measure(c.report, "R.density", tree, *v.measure_certificate.measure);
    c.report.put("k0.max_expectation", v.max_k0_expectation);
  } else {
    c.report.put("certificate", to_string(CertificateKind::static_arbitrage_claim));
    put_claim(c.report, "claim", *v.static_certificate.claim);
    c.report.put("claim.price", price(m, *v.static_certificate.claim, StoppingTime::root(tree)).values[0]);
  }
  return v.no_free_lunch ? 0 : 1;
}

inline int cmd_bounds(Context& c) {
  const auto& tree = c.market.tree;
  const auto x = c.claim();
  if (c.opt.kind == "mme") {
    const auto b = mme_bounds(tree, c.assets(), x, c.settings);
    c.report.put("lower", b.sub);
    c.report.put("upper", b.sup);
    c.report.put("equivalent", b.equivalent);
    if (!b.equivalent) c.report.put("note", "no-equivalent-mme: bounds are over the closed polytope");
  } else if (c.opt.kind == "calibrated") {
    const auto b = calibrated_bounds(tree, c.assets(), c.market.quotes, x, c.settings);
    c.report.put("lower", b.lower);
    c.report.put("upper", b.upper);
    c.report.put("quotes", c.market.quotes.size());
  } else if (c.opt.kind == "good-deal") {
    GoodDealCaps caps;
    if (c.opt.good_deal_cap) caps.global = *c.opt.good_deal_cap;
    else if (c.market.caps) caps = *c.market.caps;
    else throw Error(Errc::invariant_violation, "good-deal bounds need --good-deal-cap or a good_deal_caps section");
    const auto g = good_deal_bounds(tree, c.assets(), caps, x, c.settings);
    c.report.put("lower", g.bounds.lower);
    c.report.put("upper", g.bounds.upper);
    c.report.put("cuts", g.cuts);
  } else {
    throw Error(Errc::parse_error, "--kind must be mme, calibrated or good-deal");
  }
  return 0;
}

inline int cmd_calibrate(Context& c) {
  const auto& tree = c.market.tree;
  const auto cal = calibration_feasible(tree, c.assets(), c.market.quotes, c.settings);
  c.report.put("feasible", cal.measure.has_value());
  c.report.put("margin", cal.margin);
  if (cal.measure) put_measure(c.report, "Q0.density", tree, *cal.measure);
  bool ok = cal.measure.has_value();
  if (c.market.model)
    ok &= c.report.check("strong-admissibility",
                         check_strong_admissibility(*c.market.model, c.assets(), c.market.quotes, c.seed));
  return ok ? 0 : 1;
}

inline int cmd_extends(Context& c) {
  return c.report.check("extends", check_extends_dynamics(c.model(), c.assets(), c.seed, 20, c.tol(1e-9))) ? 0 : 1;
}

inline int cmd_constrained(Context& c) {
  if (!c.market.constraints) throw Error(Errc::invariant_violation, "/constraint_set: this command needs a constraint set");
  const auto p = constrained_price(c.market.tree, c.assets(), *c.market.constraints, c.claim(), c.settings);
  c.report.put("price", p.value);
  return 0;
}

inline int cmd_american(Context& c) {
  const auto cf = c.claim_file();
  if (!cf.process) throw Error(Errc::invariant_violation, "american needs a claim file with 'process'");
  const auto& tree = c.market.tree;
  const auto nu = parse_cut(tree, c.opt.at);
  const auto r = american_price(c.model(), *cf.process, nu, StoppingTime::terminal(tree), c.settings.max_enumeration,
                                c.tol(1e-9));
  put_claim(c.report, "value", r.value);
  put_claim(c.report, "induction", r.induction);
  c.report.put("agree", r.agree);
  c.report.put("max_gap", r.max_gap);
  c.report.put("stopping_times", r.stopping_times);
  if (!r.agree) c.report.put("note", "enumeration and backward induction differ; the enumerated value is reported");
  return 0;
}

}  // namespace detail

/// Runs one command; `args` excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options opt;
  CLI::App app{"Bid-ask dynamic pricing on finite event trees", "tcpp"};
  app.require_subcommand(1);
  const std::vector<std::pair<std::string, std::string>> commands{
      {"price", "bid and ask of a claim at a stopping time"},
      {"check-tcpp", "axioms, time consistency, cocycle and non-degeneracy of the model"},
      {"nfl", "no-free-lunch verdict with a certificate"},
      {"bounds", "martingale, calibrated or good-deal price bounds"},
      {"calibrate", "martingale measure matching the quoted spreads"},
      {"extends", "does the model price the reference assets at their spot values"},
      {"constrained", "price under portfolio constraints"},
      {"american", "price of an adapted payoff process"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--market", opt.market, "market file (JSON)")->required();
    sub->add_option("--claim", opt.claim, "claim file (JSON)");
    sub->add_option("--at", opt.at, "stopping time: root, terminal, t=K or node ids");
    sub->add_option("--seed", opt.seed, "seed for sampled checks (default 1)");
    sub->add_option("--tol", opt.tol, "tolerance for identity checks");
    sub->add_option("--good-deal-cap", opt.good_deal_cap, "global good-deal cap A >= 1");
    sub->add_option("--kind", opt.kind, "bounds kind")->check(CLI::IsMember({"mme", "calibrated", "good-deal"}));
    sub->add_option("--format", opt.format, "output format")->check(CLI::IsMember({"text", "machine"}));
    sub->callback([&opt, sub] { opt.command = sub->get_name(); });
  }

  std::vector<std::string> storage{"tcpp"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : storage) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  Report report(opt.format == "machine");
  try {
    auto market = parse_market_file(opt.market);
    auto settings = NumericSettings{};
    if (market.settings.check_tol) settings.check_tol = *market.settings.check_tol;
    if (market.settings.max_enumeration) settings.max_enumeration = *market.settings.max_enumeration;
    if (const char* env = std::getenv("TCPP_MAX_ENUM"); env != nullptr && *env != '\0')
      settings.max_enumeration = NumericSettings::from_env().max_enumeration;
    if (opt.tol) settings.check_tol = *opt.tol;
    const std::uint64_t seed = opt.seed.value_or(market.settings.seed.value_or(kDefaultSeed));
    detail::Context ctx{opt, std::move(market), settings, seed, report};
    int code = 0;
    if (opt.command == "price") code = detail::cmd_price(ctx);
    else if (opt.command == "check-tcpp") code = detail::cmd_check_tcpp(ctx);
    else if (opt.command == "nfl") code = detail::cmd_nfl(ctx);
    else if (opt.command == "bounds") code = detail::cmd_bounds(ctx);
    else if (opt.command == "calibrate") code = detail::cmd_calibrate(ctx);
    else if (opt.command == "extends") code = detail::cmd_extends(ctx);
    else if (opt.command == "constrained") code = detail::cmd_constrained(ctx);
    else if (opt.command == "american") code = detail::cmd_american(ctx);
    report.print(out);
    return code;
  } catch (const Error& e) {
    report.print(out);
    err << "error: " << e.what() << '\n';
    return is_input_error(e.code()) ? 2 : 1;
  }
}

}  // namespace tcpp::cli
