#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "coind/corel.hpp"
#include "coind/ilc.hpp"
#include "coind/stream_lang.hpp"

using json = nlohmann::ordered_json;
using namespace coind;

namespace {

constexpr const char* kSchema = "coind-report/1";

enum Exit { kOk = 0, kParse = 1, kNegative = 2, kUnknown = 3 };

struct RunConfig {
  std::size_t depth = 6;
  std::size_t fuel = 10000;
  std::size_t len = 10;
  std::size_t stage = 12;
  std::size_t window = 8;
  std::size_t samples = 64;
  std::size_t iters = 256;
  std::size_t memo_cap = 10000;
  std::uint64_t seed = 0;
  std::string format = "text";

  json to_json() const {
    return {{"depth", depth}, {"fuel", fuel},     {"len", len},       {"stage", stage},
            {"window", window}, {"samples", samples}, {"iters", iters}, {"memo_cap", memo_cap},
            {"seed", seed},   {"format", format}};
  }
  void validate() const {
    for (std::size_t v : {fuel, samples, iters, memo_cap})
      if (v == 0) throw CLI::ValidationError("caps must be at least 1");
  }
};

struct Report {
  std::string command;
  json result = json::object();
  std::ostringstream text;
  int code = kOk;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// "@path" reads a term from a file
std::string term_arg(const std::string& a) {
  if (a.size() > 1 && a[0] == '@') {
    std::string s = read_file(a.substr(1));
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    return s;
  }
  return a;
}

// ---- streams ----

void streams_check(const std::string& file, const RunConfig& c, Report& r) {
  auto eqs = streams::parse_defs(read_file(file));
  json defs = json::array();
  bool neg = false, unk = false;
  for (const auto& v : streams::check_definitions(eqs, c.samples, c.iters)) {
    json d = {{"name", v.name}, {"status", pf::to_string(v.verdict.status)}};
    r.text << v.name << ": " << pf::to_string(v.verdict.status);
    if (v.verdict.witness) {
      d["witness"] = *v.verdict.witness;
      r.text << " (witness n=" << *v.verdict.witness << ")";
    }
    r.text << "\n";
    neg |= v.verdict.status == pf::Status::not_productive;
    unk |= v.verdict.status == pf::Status::unknown;
    defs.push_back(d);
  }
  r.result["definitions"] = defs;
  r.code = neg ? kNegative : unk ? kUnknown : kOk;
}

void streams_eval(const std::string& file, const std::string& target, const RunConfig& c, Report& r) {
  auto eqs = streams::parse_defs(read_file(file));
  try {
    auto p = streams::evaluate_prefix_ex(eqs, target, c.len, c.iters);
    for (std::size_t i = 0; i < p.values.size(); ++i) r.text << (i ? " " : "") << p.values[i];
    r.text << "\n";
    r.result["prefix"] = p.values;
    r.result["levels"] = p.levels;
  } catch (const streams::insufficient_iterations& e) {
    r.text << "unknown: " << e.what() << "\n";
    r.result["unknown"] = e.what();
    r.code = kUnknown;
  }
}

void streams_pf(const std::string& file, const std::string& name, const RunConfig& c, Report& r) {
  auto eqs = streams::parse_defs(read_file(file));
  auto sys = streams::derive_pf(eqs);
  const auto& eq = sys.at(name);
  if (eq.arity > 2) throw std::invalid_argument("pf tables support arity at most 2");
  std::size_t bound = eq.arity == 2 ? std::min<std::size_t>(c.samples, 16) : c.samples;
  std::vector<pf::PFPoint> pts;
  if (eq.arity == 0) pts.push_back({});
  for (std::size_t n = 0; eq.arity >= 1 && n <= bound; ++n) {
    if (eq.arity == 1) pts.push_back({ExtNat(n)});
    else
      for (std::size_t m = 0; m <= bound; ++m) pts.push_back({ExtNat(n), ExtNat(m)});
  }
  auto vals = pf::solve_pf_batch(sys, name, pts, c.iters);
  json rows = json::array();
  bool lower = false;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    json row = json::object();
    json args = json::array();
    for (const auto& a : pts[i]) {
      args.push_back(a.str());
      r.text << a.str() << "\t";
    }
    row["args"] = args;
    row["value"] = vals[i].value.str();
    row["exact"] = vals[i].exact();
    lower |= !vals[i].exact();
    r.text << vals[i].value.str() << (vals[i].exact() ? "" : "\t(lower bound)") << "\n";
    rows.push_back(row);
  }
  r.result["name"] = name;
  r.result["arity"] = eq.arity;
  r.result["table"] = rows;
  if (lower) r.code = kUnknown;
}

// ---- lambda ----

json bohm_json(const ilc::BohmNode& n) {
  static const char* kinds[] = {"node", "bottom", "unresolved", "cut"};
  json j = {{"kind", kinds[n.kind]}};
  if (n.kind == ilc::BohmNode::Node) {
    j["binders"] = n.binders;
    j["head"] = n.head;
    json kids = json::array();
    for (const auto& k : n.children) kids.push_back(bohm_json(k));
    j["children"] = kids;
  }
  return j;
}

// "beta@1.0,bot@e" ; a bare position means beta
std::vector<ilc::ReductionStep> parse_steps(const std::string& text) {
  std::vector<ilc::ReductionStep> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty()) continue;
    ilc::ReductionStep s;
    std::string pos = item;
    auto at = item.find('@');
    if (at != std::string::npos) {
      std::string rule = item.substr(0, at);
      pos = item.substr(at + 1);
      if (rule == "bot") s.rule = ilc::ReductionStep::Bot;
      else if (rule != "beta") throw parse_error("unknown step rule '" + rule + "'", 1, 1);
    }
    try {
      s.pos = parse_position(pos);
    } catch (const std::invalid_argument& e) {
      throw parse_error(e.what(), 1, 1);
    }
    out.push_back(s);
  }
  return out;
}

std::string steps_text(const std::vector<ilc::ReductionStep>& ps) {
  std::string out;
  for (const auto& s : ps) out += (out.empty() ? "" : ",") + std::string(s.rule == s.Beta ? "beta@" : "bot@") + to_string(s.pos);
  return out.empty() ? "-" : out;
}

void lambda_bohm(const std::string& term, const RunConfig& c, Report& r) {
  auto t = ilc::parse_kernel(term_arg(term));
  auto b = ilc::bohm_tree(t, c.depth, ilc::BohmOptions{c.fuel, c.memo_cap});
  r.text << ilc::to_text(b) << "\n";
  r.result["tree"] = bohm_json(b);
  r.result["text"] = ilc::to_text(b);
  r.result["resolved"] = b.resolved();
  if (!b.resolved()) r.code = kUnknown;
}

void lambda_reduce(const std::string& term, const std::string& steps, const RunConfig& c, Report& r) {
  auto t = ilc::parse_kernel(term_arg(term));
  auto ps = parse_steps(steps);
  auto u = ilc::apply_steps(t, ps, c.fuel);
  r.text << ilc::print(u) << "\n";
  r.result["term"] = ilc::print(u);
  r.result["steps"] = steps_text(ps);
}

void lambda_confluence(const std::string& term, const std::vector<std::string>& paths, const RunConfig& c,
                       Report& r) {
  auto t = ilc::parse_kernel(term_arg(term));
  std::vector<std::pair<std::vector<ilc::ReductionStep>, std::vector<ilc::ReductionStep>>> pairs;
  if (paths.size() == 2) {
    pairs.push_back({parse_steps(paths[0]), parse_steps(paths[1])});
  } else if (paths.empty()) {
    std::mt19937_64 rng(c.seed);
    for (std::size_t i = 0; i < c.samples; ++i)
      pairs.push_back({ilc::random_path(rng, t, 4), ilc::random_path(rng, t, 4)});
  } else {
    throw std::invalid_argument("confluence takes either zero or two step lists");
  }
  json runs = json::array();
  std::size_t ok = 0, div = 0, inc = 0;
  for (const auto& [p1, p2] : pairs) {
    auto res = ilc::check_confluence(t, p1, p2, c.depth, c.fuel);
    std::string v = ilc::verdict_name(res.verdict);
    (res.verdict == res.Confluent ? ok : res.verdict == res.Divergent ? div : inc) += 1;
    runs.push_back({{"left_path", steps_text(p1)},
                    {"right_path", steps_text(p2)},
                    {"verdict", v},
                    {"left", ilc::to_text(res.left)},
                    {"right", ilc::to_text(res.right)}});
    if (pairs.size() == 1 || res.verdict != res.Confluent)
      r.text << v << ": [" << steps_text(p1) << "] " << ilc::to_text(res.left) << "  vs  [" << steps_text(p2)
             << "] " << ilc::to_text(res.right) << "\n";
  }
  if (pairs.size() > 1) r.text << "confluent " << ok << ", divergent " << div << ", inconclusive " << inc << "\n";
  r.result["runs"] = runs;
  r.result["summary"] = {{"confluent", ok}, {"divergent", div}, {"inconclusive", inc}};
  r.code = div ? kNegative : inc ? kUnknown : kOk;
}

void lambda_alpha(const std::string& a, const std::string& b, const RunConfig& c, Report& r) {
  bool eq = ilc::alpha_eq_to_depth(ilc::parse_term(term_arg(a)), ilc::parse_term(term_arg(b)), c.depth);
  r.text << (eq ? "true" : "false") << "\n";
  r.result["alpha_equal"] = eq;
}

// ---- rel ----

void rel_check(const std::string& rules, const std::string& judgment, const RunConfig& c, Report& r) {
  std::string src = rules == "builtin:arrowT" ? rel::arrow_T_source() : read_file(rules);
  if (rules.rfind("builtin:", 0) == 0 && rules != "builtin:arrowT")
    throw std::invalid_argument("unknown builtin rule set '" + rules + "'");
  if (!judgment.empty()) {
    // the judgment is checked against the file's declarations only
    std::string decls;
    std::istringstream in(src);
    for (std::string line; std::getline(in, line);)
      if (line.find("check") != 0) decls += line + "\n";
    src = decls + "check " + judgment + "\n";
  }
  auto rf = rel::parse_rule_file(src);
  json checks = json::array();
  for (std::size_t i = 0; i < rf.checks.size(); ++i) {
    bool h = rf.rules.holds(rf.checks[i], c.stage);
    checks.push_back(json{{"judgment", rf.check_texts[i]}, {"stage", c.stage}, {"holds", h}});
    if (rf.checks.size() == 1) r.text << (h ? "true" : "false") << "\n";
    else r.text << rf.check_texts[i] << " @" << c.stage << ": " << (h ? "true" : "false") << "\n";
  }
  if (rf.checks.empty()) r.text << "no judgments to check\n";
  r.result["checks"] = checks;
}

void rel_trace(const std::string& op_name, std::size_t extra, const RunConfig& c, Report& r) {
  if (op_name != "builtin:omega-plus-one") throw std::invalid_argument("unknown window operator '" + op_name + "'");
  if (c.window == 0) throw CLI::ValidationError("--window must be at least 1");
  auto tr = rel::closure_ordinal_trace(rel::omega_plus_one_operator(c.window), extra);
  json stages = json::array();
  for (std::size_t n = 0; n < tr.stages.size(); ++n) {
    r.text << "R^" << n << " = " << rel::snapshot_text(tr.stages[n]) << "\n";
    stages.push_back(rel::snapshot_text(tr.stages[n]));
  }
  r.text << "R^w = " << rel::snapshot_text(tr.omega) << "\n";
  json after = json::array();
  for (std::size_t k = 0; k < tr.after.size(); ++k) {
    r.text << "R^(w+" << k + 1 << ") = " << rel::snapshot_text(tr.after[k]) << "\n";
    after.push_back(rel::snapshot_text(tr.after[k]));
  }
  r.result["stages"] = stages;
  r.result["omega"] = rel::snapshot_text(tr.omega);
  r.result["after"] = after;
  r.result["extra"] = extra;
}

void add_config(CLI::App* sub, RunConfig& c) {
  sub->add_option("--depth", c.depth, "tree / bisimulation depth");
  sub->add_option("--fuel", c.fuel, "head-reduction fuel");
  sub->add_option("--len", c.len, "stream prefix length");
  sub->add_option("--stage", c.stage, "relation stage");
  sub->add_option("--window", c.window, "closure window size");
  sub->add_option("--samples", c.samples, "sample bound");
  sub->add_option("--iters", c.iters, "iteration cap");
  sub->add_option("--memo-cap", c.memo_cap, "memo cap");
  sub->add_option("--seed", c.seed, "seed for randomized runs");
  sub->add_option("--format", c.format, "text or machine")->check(CLI::IsMember({"text", "machine"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coind: coinductive streams, infinitary lambda terms, coinductive relations"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::string file, name, term, term2, rules, judgment, steps;
  std::vector<std::string> paths;
  std::function<void(Report&)> action;

  auto* streams = app.add_subcommand("streams", "stream definitions")->require_subcommand(1);
  auto* s_check = streams->add_subcommand("check", "productivity verdicts");
  s_check->add_option("file", file)->required();
  s_check->callback([&] { action = [&](Report& r) { streams_check(file, cfg, r); }; });
  auto* s_eval = streams->add_subcommand("eval", "stream prefix");
  s_eval->add_option("file", file)->required();
  s_eval->add_option("name", name, "definition or closed expression")->required();
  s_eval->callback([&] { action = [&](Report& r) { streams_eval(file, name, cfg, r); }; });
  auto* s_pf = streams->add_subcommand("pf", "production function table");
  s_pf->add_option("file", file)->required();
  s_pf->add_option("name", name)->required();
  s_pf->callback([&] { action = [&](Report& r) { streams_pf(file, name, cfg, r); }; });

  auto* lambda = app.add_subcommand("lambda", "infinitary lambda terms")->require_subcommand(1);
  auto* l_bohm = lambda->add_subcommand("bohm", "Bohm tree to depth");
  l_bohm->add_option("term", term)->required();
  l_bohm->callback([&] { action = [&](Report& r) { lambda_bohm(term, cfg, r); }; });
  auto* l_reduce = lambda->add_subcommand("reduce", "apply a step list, e.g. beta@e,bot@1");
  l_reduce->add_option("term", term)->required();
  l_reduce->add_option("steps", steps)->required();
  l_reduce->callback([&] { action = [&](Report& r) { lambda_reduce(term, steps, cfg, r); }; });
  auto* l_conf = lambda->add_subcommand("confluence", "compare Bohm trees after two step lists");
  l_conf->add_option("term", term)->required();
  l_conf->add_option("paths", paths, "two step lists; omit for seeded random paths");
  l_conf->callback([&] { action = [&](Report& r) { lambda_confluence(term, paths, cfg, r); }; });
  auto* l_alpha = lambda->add_subcommand("alpha", "alpha equivalence to depth");
  l_alpha->add_option("left", term)->required();
  l_alpha->add_option("right", term2)->required();
  l_alpha->callback([&] { action = [&](Report& r) { lambda_alpha(term, term2, cfg, r); }; });

  auto* rel = app.add_subcommand("rel", "coinductive relations")->require_subcommand(1);
  auto* r_check = rel->add_subcommand("check", "judgment at a stage");
  r_check->add_option("rules", rules, "rule file or builtin:arrowT")->required();
  r_check->add_option("judgment", judgment, "defaults to the file's check lines");
  r_check->callback([&] { action = [&](Report& r) { rel_check(rules, judgment, cfg, r); }; });
  auto* r_trace = rel->add_subcommand("trace", "closure ordinal trace");
  r_trace->add_option("operator", rules, "builtin:omega-plus-one")->required();
  std::size_t extra = 1;
  r_trace->add_option("--extra", extra, "steps past the omega snapshot");
  r_trace->callback([&] { action = [&](Report& r) { rel_trace(rules, extra, cfg, r); }; });

  for (auto* s : {s_check, s_eval, s_pf, l_bohm, l_reduce, l_conf, l_alpha, r_check, r_trace}) add_config(s, cfg);

  try {
    app.parse(argc, argv);
    cfg.validate();
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kParse;
  }

  Report rep;
  for (const auto* top : app.get_subcommands())
    for (const auto* leaf : top->get_subcommands()) rep.command = top->get_name() + " " + leaf->get_name();
  std::string error;
  try {
    action(rep);
  } catch (const parse_error& e) {
    error = std::string("parse error: ") + e.what();
    rep.code = kParse;
  } catch (const streams::insufficient_iterations& e) {
    error = std::string("unknown: ") + e.what();
    rep.code = kUnknown;
  } catch (const std::exception& e) {
    error = std::string("error: ") + e.what();
    rep.code = kParse;
  }

  if (cfg.format == "machine") {
    json doc = {{"schema", kSchema}, {"command", rep.command}, {"config", cfg.to_json()}, {"seed", cfg.seed}};
    doc["exit_code"] = rep.code;
    if (!error.empty()) doc["error"] = error;
    else doc["result"] = rep.result;
    std::cout << doc.dump(2) << "\n";
  } else {
    if (!error.empty()) std::cerr << error << "\n";
    std::cout << rep.text.str();
    std::cout << "# seed " << cfg.seed << "\n";
  }
  return rep.code;
}
