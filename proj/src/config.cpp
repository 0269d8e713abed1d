#include "rgflow/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "rgflow/report.hpp"

namespace rg {

namespace {

std::string join_problems(const std::vector<std::string>& ps) {
  std::string s = "invalid configuration";
  for (const auto& p : ps) s += "\n  " + p;
  return s;
}

std::string trim(std::string s) {
  auto ns = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), ns));
  s.erase(std::find_if(s.rbegin(), s.rend(), ns).base(), s.end());
  return s;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(v);
  while (std::getline(ss, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

double to_double(const std::string& s) {
  const char* b = s.c_str();
  char* e = nullptr;
  errno = 0;
  double v = std::strtod(b, &e);
  if (s.empty() || e == b || *e != '\0' || errno == ERANGE || !std::isfinite(v))
    throw std::invalid_argument("expected a finite number, got '" + s + "'");
  return v;
}

long to_long(const std::string& s) {
  const char* b = s.c_str();
  char* e = nullptr;
  errno = 0;
  long v = std::strtol(b, &e, 10);
  if (s.empty() || e == b || *e != '\0' || errno == ERANGE)
    throw std::invalid_argument("expected an integer, got '" + s + "'");
  return v;
}

int to_int(const std::string& s) {
  long v = to_long(s);
  if (v < INT32_MIN || v > INT32_MAX) throw std::invalid_argument("integer out of range: " + s);
  return static_cast<int>(v);
}

bool to_bool(const std::string& s) {
  std::string l = s;
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return std::tolower(c); });
  if (l == "true" || l == "1" || l == "yes" || l == "on") return true;
  if (l == "false" || l == "0" || l == "no" || l == "off") return false;
  throw std::invalid_argument("expected a boolean, got '" + s + "'");
}

std::vector<double> to_doubles(const std::string& s) {
  std::vector<double> v;
  for (const auto& p : split_list(s)) v.push_back(to_double(p));
  return v;
}

std::vector<int> to_ints(const std::string& s) {
  std::vector<int> v;
  for (const auto& p : split_list(s)) v.push_back(to_int(p));
  return v;
}

using Json = nlohmann::ordered_json;

struct Key {
  std::string name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<Json(const RunConfig&)> get;
};

Json doubles_json(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

Json ints_json(const std::vector<int>& v) {
  Json a = Json::array();
  for (int x : v) a.push_back(x);
  return a;
}

#define RG_NUM(section, field, expr, conv)                                             \
  Key {                                                                                \
    section "." #field, [](RunConfig& c, const std::string& v) { expr = conv(v); },    \
        [](const RunConfig& c) { return Json(expr); }                                  \
  }

const std::vector<Key>& schema() {
  static const std::vector<Key> keys = [] {
    std::vector<Key> k = {
        RG_NUM("torus", L, c.torus.L, to_int),
        RG_NUM("torus", N, c.torus.N, to_int),
        RG_NUM("torus", d, c.torus.d, to_int),
        RG_NUM("torus", m, c.torus.m, to_int),
        RG_NUM("torus", R0, c.torus.R0, to_int),
        RG_NUM("torus", r0, c.torus.r0, to_int),
        Key{"potential.family",
            [](RunConfig& c, const std::string& v) { c.potential.family = parse_family(v); },
            [](const RunConfig& c) { return Json(family_name(c.potential.family)); }},
        RG_NUM("potential", stiffness, c.potential.stiffness, to_double),
        RG_NUM("potential", kappa, c.potential.kappa, to_double),
        RG_NUM("potential", omega_w, c.potential.omega_w, to_double),
        RG_NUM("potential", epsilon, c.potential.epsilon, to_double),
        RG_NUM("potential", omega, c.potential.omega, to_double),
        RG_NUM("potential", omega0, c.potential.omega0, to_double),
        RG_NUM("potential", beta, c.beta, to_double),
        Key{"potential.F", [](RunConfig& c, const std::string& v) { c.F = to_doubles(v); },
            [](const RunConfig& c) { return doubles_json(c.F); }},
        RG_NUM("flow", cutoff, c.flow.step.cutoff, to_int),
        RG_NUM("flow", cutoff0, c.flow.step.cutoff0, to_int),
        RG_NUM("flow", budget, c.flow.step.budget, to_long),
        Key{"flow.seed", [](RunConfig& c, const std::string& v) { c.flow.step.seed = static_cast<uint64_t>(to_long(v)); },
            [](const RunConfig& c) { return Json(c.flow.step.seed); }},
        RG_NUM("flow", gh_nodes, c.flow.step.gh_nodes, to_int),
        RG_NUM("flow", fd_step, c.flow.step.pi2.fd_step, to_double),
        RG_NUM("flow", pi2_samples, c.flow.step.pi2.samples, to_long),
        RG_NUM("flow", pi2_batches, c.flow.step.pi2.batches, to_int),
        RG_NUM("flow", final_samples, c.flow.final_samples, to_long),
        RG_NUM("flow", batches, c.flow.batches, to_int),
        RG_NUM("flow", norm_samples, c.flow.norm_samples, to_long),
        RG_NUM("flow", tuner_tol, c.flow.tuner_tol, to_double),
        RG_NUM("flow", tuner_max_iter, c.flow.tuner_max_iter, to_int),
        RG_NUM("flow", e, c.e, to_double),
        Key{"flow.q",
            [](RunConfig& c, const std::string& v) {
              auto xs = to_doubles(v);
              c.q.resize(0, 0);
              c.q = Eigen::Map<Eigen::VectorXd>(xs.data(), static_cast<long>(xs.size()));
            },
            [](const RunConfig& c) {
              std::vector<double> v(c.q.data(), c.q.data() + c.q.size());
              return doubles_json(v);
            }},
        Key{"quad.mode",
            [](RunConfig& c, const std::string& v) {
              if (v == "monte_carlo")
                c.quad.mode = QuadratureSpec::Mode::monte_carlo;
              else if (v == "gauss_hermite")
                c.quad.mode = QuadratureSpec::Mode::gauss_hermite;
              else
                throw std::invalid_argument("expected monte_carlo or gauss_hermite, got '" + v + "'");
            },
            [](const RunConfig& c) {
              return Json(c.quad.mode == QuadratureSpec::Mode::monte_carlo ? "monte_carlo" : "gauss_hermite");
            }},
        RG_NUM("quad", samples, c.quad.samples, to_long),
        RG_NUM("quad", gh_nodes, c.quad.gh_nodes, to_int),
        Key{"quad.seed", [](RunConfig& c, const std::string& v) { c.quad.seed = static_cast<uint64_t>(to_long(v)); },
            [](const RunConfig& c) { return Json(c.quad.seed); }},
        RG_NUM("quad", antithetic, c.quad.antithetic, to_bool),
        RG_NUM("quad", batches, c.quad.batches, to_int),
        RG_NUM("weights", h, c.flow.weights.h, to_double),
        RG_NUM("weights", zeta, c.flow.weights.zeta, to_double),
        RG_NUM("weights", lambda_W, c.flow.weights.lambda_W, to_double),
        RG_NUM("weights", lambda_big, c.flow.weights.lambda_big, to_double),
        RG_NUM("weights", A, c.flow.weights.A, to_double),
        RG_NUM("run", fields, c.run.fields, to_int),
        RG_NUM("run", field_scale, c.run.field_scale, to_double),
        RG_NUM("run", samples, c.run.samples, to_long),
        RG_NUM("run", tune, c.run.tune, to_bool),
        RG_NUM("run", norms, c.run.norms, to_bool),
        RG_NUM("run", directions, c.run.directions, to_int),
        RG_NUM("run", restriction_trials, c.run.restriction_trials, to_int),
        RG_NUM("run", decay, c.run.decay, to_bool),
        RG_NUM("run", decay_pi2_samples, c.run.decay_pi2_samples, to_long),
        RG_NUM("run", decay_flow_samples, c.run.decay_flow_samples, to_long),
        RG_NUM("run", wick_trials, c.run.wick_trials, to_int),
        RG_NUM("run", f_amplitude, c.run.f_amplitude, to_double),
        RG_NUM("run", N2, c.run.N2, to_int),
        RG_NUM("run", windows, c.run.windows, to_int),
        Key{"run.grid", [](RunConfig& c, const std::string& v) { c.run.grid = to_doubles(v); },
            [](const RunConfig& c) { return doubles_json(c.run.grid); }},
        RG_NUM("run", control_epsilon, c.run.control_epsilon, to_double),
        Key{"run.q_list", [](RunConfig& c, const std::string& v) { c.run.q_list = to_doubles(v); },
            [](const RunConfig& c) { return doubles_json(c.run.q_list); }},
        Key{"run.N_list", [](RunConfig& c, const std::string& v) { c.run.N_list = to_ints(v); },
            [](const RunConfig& c) { return ints_json(c.run.N_list); }},
        RG_NUM("run", workers, c.run.workers, to_int),
        RG_NUM("scaling", amplitude, c.run.scaling.amplitude, to_double),
        Key{"scaling.mode", [](RunConfig& c, const std::string& v) { c.run.scaling.mode = to_ints(v); },
            [](const RunConfig& c) { return ints_json(c.run.scaling.mode); }},
        Key{"scaling.Ns", [](RunConfig& c, const std::string& v) { c.run.scaling.Ns = to_ints(v); },
            [](const RunConfig& c) { return ints_json(c.run.scaling.Ns); }},
        RG_NUM("tolerance", frd, c.tol.frd, to_double),
        RG_NUM("tolerance", frd_n, c.tol.frd_n, to_double),
        RG_NUM("tolerance", sigmas, c.tol.sigmas, to_double),
        RG_NUM("tolerance", conserve_rel, c.tol.conserve_rel, to_double),
        RG_NUM("tolerance", representation_rel, c.tol.representation_rel, to_double),
        RG_NUM("tolerance", closed_form, c.tol.closed_form, to_double),
        RG_NUM("tolerance", scaling, c.tol.scaling, to_double),
        RG_NUM("tolerance", zd_sigma, c.tol.zd_sigma, to_double),
        Key{"output.dir", [](RunConfig& c, const std::string& v) { c.out_dir = v; },
            [](const RunConfig& c) { return Json(c.out_dir); }},
        RG_NUM("output", json, c.json, to_bool),
        RG_NUM("output", csv, c.csv, to_bool),
    };
    return k;
  }();
  return keys;
}

#undef RG_NUM

const Key* find_key(const std::string& name) {
  for (const auto& k : schema())
    if (k.name == name) return &k;
  return nullptr;
}

RunConfig defaults() {
  RunConfig c;
  c.F.clear();
  c.run.grid = {-0.2, -0.15, -0.1, -0.05, 0.0, 0.05, 0.1, 0.15, 0.2};
  c.run.q_list = {0.0, 0.1, -0.1};
  c.run.N_list = {1, 2, 3};
  return c;
}

// Derived values and range checks once every key is applied.
void finish(RunConfig& c, std::vector<std::string>& problems) {
  auto need = [&](bool ok, const std::string& msg) {
    if (!ok) problems.push_back(msg);
  };
  auto& t = c.torus;
  need(t.L >= 3 && t.L % 2 == 1, "torus.L: must be an odd integer >= 3");
  need(t.N >= 1 && t.N <= 8, "torus.N: must be in [1, 8]");
  need(t.d >= 2 && t.d <= 3, "torus.d: must be 2 or 3");
  need(t.m == 1, "torus.m: only scalar fields (m = 1) are supported");
  need(t.R0 >= 1, "torus.R0: must be >= 1");
  need(t.r0 >= 3, "torus.r0: must be >= 3");
  need(c.beta > 0.0, "potential.beta: must be positive");
  c.potential.d = t.d;
  if (!problems.empty()) return;
  t = make_torus(t.L, t.N, t.d, t.m, t.R0, t.r0);
  if (c.F.empty()) c.F.assign(t.d, 0.0);
  need(static_cast<int>(c.F.size()) == t.d, fmt::format("potential.F: needs {} components", t.d));
  if (c.q.size() == 0) {
    c.q = Eigen::MatrixXd::Zero(t.d, t.d);
  } else if (c.q.size() == 1) {
    c.q = c.q(0) * Eigen::MatrixXd::Identity(t.d, t.d);
  } else if (c.q.size() == t.d * t.d) {
    Eigen::MatrixXd m = Eigen::Map<Eigen::MatrixXd>(c.q.data(), t.d, t.d).transpose();
    need((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-14, "flow.q: must be symmetric");
    c.q = m;
  } else {
    problems.push_back(fmt::format("flow.q: give 1 value (times identity) or {} values", t.d * t.d));
  }
  need(c.flow.step.cutoff >= 1 && c.flow.step.cutoff0 >= 1, "flow.cutoff: cutoffs must be >= 1");
  need(c.flow.step.budget >= 1, "flow.budget: must be positive");
  need(c.flow.step.gh_nodes >= 2 && c.flow.step.gh_nodes <= 64, "flow.gh_nodes: must be in [2, 64]");
  need(c.flow.step.pi2.fd_step > 0.0, "flow.fd_step: must be positive");
  need(c.flow.step.pi2.samples >= 2 && c.flow.step.pi2.batches >= 2, "flow.pi2_samples: need >= 2 samples and batches");
  need(c.flow.final_samples >= 2 && c.flow.batches >= 2, "flow.final_samples: need >= 2 samples and batches");
  need(c.flow.norm_samples >= 2, "flow.norm_samples: must be >= 2");
  need(c.flow.tuner_tol > 0.0 && c.flow.tuner_max_iter >= 1, "flow.tuner_tol: tolerance and iterations must be positive");
  need(c.quad.samples >= 2 && c.quad.batches >= 2, "quad.samples: need >= 2 samples and batches");
  need(c.quad.gh_nodes >= 2 && c.quad.gh_nodes <= 64, "quad.gh_nodes: must be in [2, 64]");
  need(c.flow.weights.h > 0.0 && c.flow.weights.A >= 1.0, "weights: need h > 0 and A >= 1");
  need(c.flow.weights.zeta > 0.0 && c.flow.weights.zeta < 1.0, "weights.zeta: must be in (0, 1)");
  need(c.run.fields >= 1 && c.run.samples >= 2, "run.fields: need >= 1 field and >= 2 samples");
  need(c.run.directions >= 0 && c.run.restriction_trials >= 0 && c.run.wick_trials >= 0,
       "run: counts must be non-negative");
  need(c.run.N2 > t.N, "run.N2: must exceed torus.N");
  need(c.run.windows >= 1, "run.windows: must be >= 1");
  need(c.run.grid.size() >= 3, "run.grid: needs at least 3 points");
  need(c.run.workers >= 0, "run.workers: must be >= 0");
  need(static_cast<int>(c.run.scaling.mode.size()) == t.d, fmt::format("scaling.mode: needs {} components", t.d));
  need(!c.run.scaling.Ns.empty(), "scaling.Ns: must not be empty");
  for (int n : c.run.scaling.Ns) need(n >= 1 && n <= 6, "scaling.Ns: entries must be in [1, 6]");
  for (int n : c.run.N_list) need(n >= 1 && n <= 6, "run.N_list: entries must be in [1, 6]");
  need(c.tol.frd > 0 && c.tol.frd_n > 0 && c.tol.sigmas > 0 && c.tol.conserve_rel > 0 &&
           c.tol.representation_rel > 0 && c.tol.closed_form > 0 && c.tol.scaling > 0 && c.tol.zd_sigma > 0,
       "tolerance: all tolerances must be positive");
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : Error(ErrorKind::parse, join_problems(problems)), problems_(std::move(problems)) {}

ConfigSource parse_ini(const std::string& text, const std::string& name) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError({fmt::format("{}:{}: {}", name, e.line(), e.message())});
  }
  // line numbers for diagnostics
  std::map<std::string, int> lines;
  {
    std::istringstream ls(text);
    std::string line, section;
    int n = 0;
    while (std::getline(ls, line)) {
      ++n;
      std::string s = trim(line);
      if (s.empty() || s[0] == ';' || s[0] == '#') continue;
      if (s[0] == '[') {
        section = trim(s.substr(1, s.find(']') - 1));
        continue;
      }
      auto eq = s.find('=');
      if (eq != std::string::npos) lines.emplace(section + "." + trim(s.substr(0, eq)), n);
    }
  }
  ConfigSource src;
  std::vector<std::string> problems;
  for (const auto& [sec, node] : tree) {
    if (node.empty()) {
      problems.push_back(fmt::format("{}: key '{}' outside a section", name, sec));
      continue;
    }
    for (const auto& [key, leaf] : node) {
      std::string full = sec + "." + key;
      auto it = lines.find(full);
      std::string where = it == lines.end() ? name : fmt::format("{}:{}", name, it->second);
      src.entries.push_back({full, trim(leaf.get_value<std::string>()), where});
    }
  }
  if (!problems.empty()) throw ConfigError(problems);
  return src;
}

ConfigSource parse_json(const std::string& text, const std::string& name) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + std::min(e.byte, text.size()), '\n'));
    throw ConfigError({fmt::format("{}:{}: {}", name, line, e.what())});
  }
  ConfigSource src;
  std::vector<std::string> problems;
  if (!j.is_object()) throw ConfigError({name + ": top level must be an object of sections"});
  auto scalar = [](const nlohmann::ordered_json& v, std::string& out) {
    if (v.is_string()) {
      out = v.get<std::string>();
    } else if (v.is_boolean()) {
      out = v.get<bool>() ? "true" : "false";
    } else if (v.is_number_integer()) {
      out = std::to_string(v.get<long long>());
    } else if (v.is_number()) {
      out = fmt::format("{:.17g}", v.get<double>());
    } else {
      return false;
    }
    return true;
  };
  for (const auto& [sec, node] : j.items()) {
    if (!node.is_object()) {
      problems.push_back(fmt::format("{}: '{}' must be a section object", name, sec));
      continue;
    }
    for (const auto& [key, v] : node.items()) {
      std::string full = sec + "." + key, text_value;
      if (v.is_array()) {
        for (const auto& x : v) {
          std::string s;
          if (!scalar(x, s)) {
            problems.push_back(fmt::format("{}: {}: list entries must be scalars", name, full));
            break;
          }
          text_value += (text_value.empty() ? "" : ",") + s;
        }
      } else if (!scalar(v, text_value)) {
        problems.push_back(fmt::format("{}: {}: value must be a scalar or a list", name, full));
        continue;
      }
      src.entries.push_back({full, text_value, name});
    }
  }
  if (!problems.empty()) throw ConfigError(problems);
  return src;
}

ConfigSource load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  bool json = path.size() >= 5 && path.substr(path.size() - 5) == ".json";
  if (!json) {
    auto p = text.find_first_not_of(" \t\r\n");
    json = p != std::string::npos && text[p] == '{';
  }
  return json ? parse_json(text, path) : parse_ini(text, path);
}

void apply_override(ConfigSource& src, const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos || assignment.find('.') > eq)
    throw ConfigError({"--set " + assignment + ": expected section.key=value"});
  src.entries.push_back({trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)), "--set"});
}

RunConfig resolve_config(const ConfigSource& src) {
  RunConfig c = defaults();
  std::vector<std::string> problems;
  for (const auto& e : src.entries) {
    const Key* k = find_key(e.key);
    if (!k) {
      problems.push_back(fmt::format("{}: unknown key '{}'", e.where, e.key));
      continue;
    }
    try {
      k->set(c, e.value);
    } catch (const std::exception& ex) {
      problems.push_back(fmt::format("{}: {}: {}", e.where, e.key, ex.what()));
    }
  }
  if (problems.empty()) finish(c, problems);
  if (!problems.empty()) throw ConfigError(problems);
  return c;
}

std::vector<std::pair<std::string, std::string>> config_keys() {
  RunConfig c = defaults();
  std::vector<std::string> ignored;
  finish(c, ignored);
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& k : schema()) out.emplace_back(k.name, dump_json(k.get(c), -1));
  return out;
}

nlohmann::ordered_json RunConfig::echo() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& k : schema()) {
    auto dot = k.name.find('.');
    j[k.name.substr(0, dot)][k.name.substr(dot + 1)] = k.get(*this);
  }
  return j;
}

std::string RunConfig::hash() const { return fmt::format("{:016x}", fnv1a(dump_json(echo(), -1))); }

MayerFunction RunConfig::mayer() const {
  PotentialSpec U = potential;
  U.d = torus.d;
  return MayerFunction(U, F, beta);
}

}  // namespace rg
