#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "lrmfg/io/csv.hpp"
#include "lrmfg/io/json_source.hpp"
#include "lrmfg/nplayer/nash_gap.hpp"
#include "lrmfg/solver/mfg.hpp"

namespace lrmfg::io {

struct ModelConfig {
  std::size_t states = 2;
  double horizon = 1.0;
  std::size_t steps = 100;
  std::optional<std::size_t> uniform_cells = 1;  // set when the atlas came from the shorthand
  PositionAtlas atlas = PositionAtlas::uniform(1);
  CostModel cost = CostModel::quadratic(2, 1.0);
  InteractionSpec running = interaction::Zero{};
  InteractionSpec terminal = interaction::Zero{};
  InitialDistribution m0;  // cell-major

  Discretization discretization() const { return {StateSpace(states), TimeGrid(horizon, steps), atlas}; }
};

struct SimulationConfig {
  std::vector<std::size_t> players{20};  // one entry per sweep point
  std::vector<double> positions;         // explicit layout; overrides `players`
  std::vector<std::size_t> runs{1000};   // one entry, or one per sweep point
  std::uint64_t seed = 0;
  double rate_cap = 1e3;
  std::vector<double> eps_grid{1e-3, 1e-2, 1e-1};
  double quantile = 0.9;
  DeviationOptions deviation;
  std::optional<std::string> load_equilibrium;  // directory written by `solve`

  std::size_t sweep_size() const { return positions.empty() ? players.size() : 1; }
  PlayerLayout layout(std::size_t k) const {
    return positions.empty() ? PlayerLayout::grid(players.at(k)) : PlayerLayout(positions);
  }
  std::size_t runs_at(std::size_t k) const { return runs.size() == 1 ? runs[0] : runs.at(k); }
};

struct GraphonConfig {
  Kernel kernel = Kernel::average();
  std::vector<std::size_t> n{32, 256};
  std::size_t seeds = 20;
  std::uint64_t seed = 0;
  std::size_t restarts = 16;
};

struct MonotonicityConfig {
  std::size_t samples = 1000;
  std::uint64_t seed = 0;
};

struct OutputConfig {
  std::string directory = "out";
  bool trajectories = true;
};

struct ExperimentConfig {
  std::string source;  // file name, for messages
  std::optional<ModelConfig> model;
  SolverConfig solver;
  std::optional<std::uint64_t> random_init_seed;  // solver starts from random_flow(seed)
  SimulationConfig simulation;
  std::optional<GraphonConfig> graphon;
  MonotonicityConfig monotonicity;
  OutputConfig output;

  const ModelConfig& need_model() const {
    if (!model) throw ConfigError(source + ":1: <root>: missing required block 'model'");
    return *model;
  }
  const GraphonConfig& need_graphon() const {
    if (!graphon) throw ConfigError(source + ":1: <root>: missing required block 'graphon'");
    return *graphon;
  }
  /// Replaces every seed in the document.
  void override_seed(std::uint64_t s) {
    simulation.seed = s;
    simulation.deviation.seed = s;
    if (graphon) graphon->seed = s;
    monotonicity.seed = s;
    if (random_init_seed) random_init_seed = s;
  }
};

namespace detail {

inline StateMatrix parse_state_matrix(const Node& n, std::size_t d) {
  if (n.is_string()) {
    if (n.string() == "identity") return StateMatrix::identity(d);
    n.fail("expected 'identity', {\"identity\": s}, {\"filled\": v} or a d x d array");
  }
  if (n.is_object()) {
    ObjectNode o(n);
    auto id = o.get("identity");
    auto fill = o.get("filled");
    o.finish();
    if (id.has_value() == fill.has_value()) n.fail("expected exactly one of 'identity', 'filled'");
    return id ? StateMatrix::identity(d, id->number()) : StateMatrix::filled(d, fill->number());
  }
  std::size_t size = 0;
  auto v = n.square_matrix(size);
  if (size != d) n.fail("expected a " + std::to_string(d) + " x " + std::to_string(d) + " matrix");
  return StateMatrix(d, std::move(v));
}

inline json state_matrix_json(const StateMatrix& m) {
  json rows = json::array();
  for (std::size_t x = 0; x < m.d; ++x) {
    json row = json::array();
    for (std::size_t y = 0; y < m.d; ++y) row.push_back(m(x, y));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Kernel parse_kernel(const Node& n) {
  ObjectNode o(n);
  auto type = o.need("type").choice<std::string>({{"constant", "constant"},
                                                  {"average", "average"},
                                                  {"product", "product"},
                                                  {"bilinear", "bilinear"},
                                                  {"gaussian", "gaussian"},
                                                  {"step", "step"}});
  Kernel k = Kernel::average();
  if (type == "constant") {
    k = Kernel::constant(o.need("value").number());
  } else if (type == "bilinear") {
    auto num = [&](const char* key) {
      auto v = o.get(key);
      return v ? v->number() : 0.0;
    };
    double c0 = num("c0"), cu = num("cu"), cv = num("cv"), cuv = num("cuv");
    k = Kernel::bilinear(c0, cu, cv, cuv);
  } else if (type == "product") {
    k = Kernel::product();
  } else if (type == "gaussian") {
    double amp = o.need("amplitude").number();
    auto w = o.need("width");
    k = Kernel::gaussian(amp, w.positive());
  } else if (type == "step") {
    auto m = o.get("matrix");
    auto f = o.get("file");
    if (m.has_value() == f.has_value()) n.fail("step kernel needs exactly one of 'matrix', 'file'");
    if (m) {
      std::size_t size = 0;
      auto v = m->square_matrix(size);
      k = Kernel::step(KernelMatrix(size, std::move(v)));
    } else {
      try {
        k = Kernel::step(read_kernel_matrix_csv(f->string()));
      } catch (const Error& e) {
        f->fail(e.what());
      }
    }
  }
  o.finish();
  return k;
}

inline json kernel_json(const Kernel& k) {
  const auto& p = k.params();
  switch (k.kind()) {
    case Kernel::Kind::Bilinear:
      return {{"type", "bilinear"}, {"c0", p[0]}, {"cu", p[1]}, {"cv", p[2]}, {"cuv", p[3]}};
    case Kernel::Kind::Gaussian:
      return {{"type", "gaussian"}, {"amplitude", p[0]}, {"width", p[1]}};
    case Kernel::Kind::Step: {
      const auto& w = *k.matrix();
      json rows = json::array();
      for (std::size_t i = 0; i < w.size(); ++i) rows.push_back(json(std::vector<double>(w.row(i).begin(), w.row(i).end())));
      return {{"type", "step"}, {"matrix", std::move(rows)}};
    }
    case Kernel::Kind::Custom:
      break;
  }
  throw InvalidArgument("config: custom kernels cannot be serialized");
}

inline Smoothing parse_smoothing(const Node& n) {
  ObjectNode o(n);
  auto type = o.need("type").choice<std::string>({{"constant", "constant"}, {"gaussian", "gaussian"}});
  Smoothing s = type == "constant" ? Smoothing::constant(o.need("value").positive())
                                   : Smoothing::gaussian(o.need("width").positive());
  o.finish();
  return s;
}

inline json smoothing_json(const Smoothing& s) {
  if (s.kind() == Smoothing::Kind::Constant) return {{"type", "constant"}, {"value", s.parameter()}};
  if (s.kind() == Smoothing::Kind::Gaussian) return {{"type", "gaussian"}, {"width", s.parameter()}};
  throw InvalidArgument("config: custom smoothing cannot be serialized");
}

inline InteractionSpec parse_interaction(const Node& n, std::size_t d) {
  ObjectNode o(n);
  auto type = o.need("type").choice<std::string>(
      {{"zero", "zero"}, {"two_body", "two_body"}, {"low_res", "low_res"}, {"local", "local"}});
  InteractionSpec spec = interaction::Zero{};
  if (type == "two_body") {
    spec = interaction::TwoBody{parse_kernel(o.need("kernel")), parse_state_matrix(o.need("f"), d)};
  } else if (type == "low_res") {
    auto kernel = parse_kernel(o.need("kernel"));
    auto lin = o.get("linear");
    auto quad = o.get("quadratic");
    spec = interaction::LowRes{kernel, lin ? parse_state_matrix(*lin, d) : StateMatrix::filled(d, 0.0),
                               quad ? parse_state_matrix(*quad, d) : StateMatrix::filled(d, 0.0),
                               parse_smoothing(o.need("smoothing"))};
  } else if (type == "local") {
    spec = interaction::Local{parse_state_matrix(o.need("f"), d)};
  }
  o.finish();
  return spec;
}

inline json interaction_json(const InteractionSpec& spec) {
  return std::visit(
      [](const auto& s) -> json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, interaction::Zero>) {
          return {{"type", "zero"}};
        } else if constexpr (std::is_same_v<T, interaction::TwoBody>) {
          return {{"type", "two_body"}, {"kernel", kernel_json(s.kernel)}, {"f", state_matrix_json(s.f)}};
        } else if constexpr (std::is_same_v<T, interaction::LowRes>) {
          return {{"type", "low_res"},
                  {"kernel", kernel_json(s.kernel)},
                  {"linear", state_matrix_json(s.linear)},
                  {"quadratic", state_matrix_json(s.quadratic)},
                  {"smoothing", smoothing_json(s.smoothing)}};
        } else {
          return {{"type", "local"}, {"f", state_matrix_json(s.f)}};
        }
      },
      spec);
}

inline AffineProfile parse_profile(const Node& n) {
  if (n.is_number()) return {n.positive(), 0.0};
  ObjectNode o(n);
  AffineProfile p{o.need("intercept").number(), 0.0};
  if (auto s = o.get("slope")) p.slope = s->number();
  o.finish();
  if (!(p.min_on_unit_interval() > 0.0)) n.fail("theta(u) must be positive on [0, 1]");
  return p;
}

inline std::vector<double> state_vector(const Node& n, std::size_t d) {
  auto v = n.numbers();
  if (v.size() != d) n.fail("expected " + std::to_string(d) + " entries, one per state");
  return v;
}

inline StatePotential parse_potential(const Node& n, std::size_t d) {
  if (n.is_array()) return StatePotential::constant(state_vector(n, d));
  ObjectNode o(n);
  StatePotential p = StatePotential::constant(state_vector(o.need("intercept"), d));
  if (auto s = o.get("slope")) p.slope = state_vector(*s, d);
  o.finish();
  return p;
}

inline CostModel parse_cost(const Node& n, std::size_t d) {
  ObjectNode o(n);
  auto family = o.need("family").choice<std::string>({{"quadratic", "quadratic"}, {"quartic", "quartic"}});
  AffineProfile theta{1.0, 0.0};
  if (auto t = o.get("theta")) theta = parse_profile(*t);
  StatePotential pot = StatePotential::zero(d);
  if (auto p = o.get("potential")) pot = parse_potential(*p, d);
  double kappa = 0.0;
  if (family == "quartic") {
    auto k = o.need("kappa");
    kappa = k.number();
    if (kappa < 0.0) k.fail("kappa must be nonnegative");
  }
  o.finish();
  return family == "quadratic" ? CostModel::quadratic(d, theta, pot) : CostModel::quartic(d, theta, kappa, pot);
}

inline json cost_json(const CostModel& c) {
  json j{{"family", c.family() == CostModel::Family::Quartic ? "quartic" : "quadratic"},
         {"theta", {{"intercept", c.theta().intercept}, {"slope", c.theta().slope}}},
         {"potential", {{"intercept", c.potential().intercept}, {"slope", c.potential().slope}}}};
  if (c.family() == CostModel::Family::Quartic) j["kappa"] = c.kappa();
  if (c.family() == CostModel::Family::Custom) throw InvalidArgument("config: custom costs cannot be serialized");
  return j;
}

inline std::vector<double> probability_vector(const Node& n, std::size_t d) {
  auto v = state_vector(n, d);
  double s = 0.0;
  for (double p : v) {
    if (p < 0.0) n.fail("probabilities must be nonnegative");
    s += p;
  }
  if (std::abs(s - 1.0) > 1e-12) n.fail("probabilities must sum to 1");
  return v;
}

inline InitialDistribution parse_initial(const Node& n, const PositionAtlas& atlas, std::size_t d) {
  const std::size_t m = atlas.size();
  InitialDistribution out;
  out.reserve(m * d);
  if (n.is_string()) {
    if (n.string() != "uniform") n.fail("expected 'uniform', a probability vector or an object");
    return uniform_initial(m, d);
  }
  if (n.is_array()) {
    auto p = probability_vector(n, d);
    for (std::size_t c = 0; c < m; ++c) out.insert(out.end(), p.begin(), p.end());
    return out;
  }
  ObjectNode o(n);
  if (o.has("cells")) {
    auto cells = o.need("cells");
    if (cells.size() != m) cells.fail("expected " + std::to_string(m) + " rows, one per atlas cell");
    for (std::size_t c = 0; c < m; ++c) {
      auto p = probability_vector(cells.at(c), d);
      out.insert(out.end(), p.begin(), p.end());
    }
  } else {
    double at = o.need("split").number();
    auto below = probability_vector(o.need("below"), d);
    auto above = probability_vector(o.need("above"), d);
    for (std::size_t c = 0; c < m; ++c) {
      const auto& p = atlas.cell(c) < at ? below : above;
      out.insert(out.end(), p.begin(), p.end());
    }
  }
  o.finish();
  return out;
}

inline ModelConfig parse_model(const Node& n) {
  ObjectNode o(n);
  ModelConfig m;
  m.states = o.need("states").count(1);
  if (auto t = o.get("time")) {
    ObjectNode to(*t);
    if (auto h = to.get("horizon")) m.horizon = h->positive();
    if (auto s = to.get("steps")) m.steps = s->count(1);
    to.finish();
  }
  if (auto a = o.get("atlas")) {
    ObjectNode ao(*a);
    if (ao.has("uniform")) {
      m.uniform_cells = ao.need("uniform").count(1);
      m.atlas = PositionAtlas::uniform(*m.uniform_cells);
    } else {
      auto cells = ao.need("cells");
      auto weights = ao.need("weights");
      try {
        m.atlas = PositionAtlas(cells.numbers(), weights.numbers());
      } catch (const InvalidArgument& e) {
        a->fail(e.what());
      }
      m.uniform_cells.reset();
    }
    ao.finish();
  }
  const std::size_t d = m.states;
  m.cost = CostModel::quadratic(d, 1.0);
  if (auto c = o.get("cost")) m.cost = parse_cost(*c, d);
  for (auto [key, target] : {std::pair{"running", &m.running}, std::pair{"terminal", &m.terminal}}) {
    auto node = o.get(key);
    if (!node) continue;
    *target = parse_interaction(*node, d);
    try {
      validate(*target, d, &m.atlas);
    } catch (const InvalidArgument& e) {
      node->fail(e.what());
    }
  }
  m.m0 = uniform_initial(m.atlas.size(), d);
  if (auto init = o.get("m0")) m.m0 = parse_initial(*init, m.atlas, d);
  o.finish();
  return m;
}

inline json model_json(const ModelConfig& m) {
  json atlas = m.uniform_cells ? json{{"uniform", *m.uniform_cells}}
                               : json{{"cells", m.atlas.cells()}, {"weights", m.atlas.weights()}};
  json cells = json::array();
  for (std::size_t c = 0; c < m.atlas.size(); ++c)
    cells.push_back(std::vector<double>(m.m0.begin() + static_cast<std::ptrdiff_t>(c * m.states),
                                        m.m0.begin() + static_cast<std::ptrdiff_t>((c + 1) * m.states)));
  return {{"states", m.states},
          {"time", {{"horizon", m.horizon}, {"steps", m.steps}}},
          {"atlas", std::move(atlas)},
          {"cost", cost_json(m.cost)},
          {"running", interaction_json(m.running)},
          {"terminal", interaction_json(m.terminal)},
          {"m0", {{"cells", std::move(cells)}}}};
}

inline const std::vector<std::pair<std::string, Integrator>> kIntegrators{{"rk4", Integrator::RK4},
                                                                          {"implicit_euler", Integrator::ImplicitEuler}};

inline std::string integrator_name(Integrator i) { return i == Integrator::RK4 ? "rk4" : "implicit_euler"; }

inline void parse_solver(const Node& n, ExperimentConfig& cfg) {
  ObjectNode o(n);
  auto& s = cfg.solver;
  if (auto v = o.get("damping")) {
    s.damping = v->number();
    if (!(s.damping > 0.0 && s.damping <= 1.0)) v->fail("damping must lie in (0, 1]");
  }
  if (auto v = o.get("tolerance")) s.tolerance = v->positive();
  if (auto v = o.get("max_iterations")) s.max_iterations = v->count(1);
  if (auto v = o.get("integrator")) s.integrator = v->choice(kIntegrators);
  if (auto v = o.get("scheme"))
    s.scheme = v->choice<PicardScheme>({{"damped", PicardScheme::Damped}, {"fictitious_play", PicardScheme::FictitiousPlay}});
  if (auto v = o.get("rate_cap")) s.rate_cap = v->positive();
  if (auto v = o.get("initial_flow")) {
    if (v->is_string()) {
      if (v->string() != "frozen") v->fail("expected 'frozen' or {\"random\": seed}");
    } else {
      ObjectNode io(*v);
      cfg.random_init_seed = io.need("random").seed();
      io.finish();
    }
  }
  o.finish();
}

inline json solver_json(const ExperimentConfig& cfg) {
  const auto& s = cfg.solver;
  return {{"damping", s.damping},
          {"tolerance", s.tolerance},
          {"max_iterations", s.max_iterations},
          {"integrator", integrator_name(s.integrator)},
          {"scheme", s.scheme == PicardScheme::Damped ? "damped" : "fictitious_play"},
          {"rate_cap", s.rate_cap},
          {"initial_flow", cfg.random_init_seed ? json{{"random", *cfg.random_init_seed}} : json("frozen")}};
}

inline void parse_simulation(const Node& n, SimulationConfig& s) {
  ObjectNode o(n);
  if (auto v = o.get("players")) s.players = v->is_array() ? v->counts(1) : std::vector<std::size_t>{v->count(1)};
  if (s.players.empty()) o.node().fail("'players' must not be empty");
  if (auto v = o.get("positions")) {
    s.positions = v->numbers();
    try {
      PlayerLayout check(s.positions);
    } catch (const InvalidArgument& e) {
      v->fail(e.what());
    }
    if (o.has("players")) v->fail("give either 'players' or 'positions', not both");
    s.players = {s.positions.size()};
  }
  if (auto v = o.get("runs")) {
    s.runs = v->is_array() ? v->counts(1) : std::vector<std::size_t>{v->count(1)};
    if (s.runs.size() != 1 && s.runs.size() != s.players.size())
      v->fail("expected one run count or one per entry of 'players'");
  }
  if (auto v = o.get("seed")) s.seed = v->seed();
  if (auto v = o.get("rate_cap")) s.rate_cap = v->positive();
  if (auto v = o.get("eps_grid")) {
    s.eps_grid = v->numbers();
    for (std::size_t k = 0; k < s.eps_grid.size(); ++k)
      if (s.eps_grid[k] < 0.0) v->at(k).fail("eps must be nonnegative");
  }
  if (auto v = o.get("quantile")) {
    s.quantile = v->number();
    if (s.quantile < 0.0 || s.quantile > 1.0) v->fail("quantile must lie in [0, 1]");
  }
  if (auto v = o.get("deviation")) {
    ObjectNode d(*v);
    auto& dev = s.deviation;
    if (auto m = d.get("mode"))
      dev.mode = m->choice<DeviationMode>(
          {{"auto", DeviationMode::Auto}, {"exact", DeviationMode::Exact}, {"heuristic", DeviationMode::Heuristic}});
    if (auto m = d.get("integrator")) dev.integrator = m->choice(kIntegrators);
    if (auto m = d.get("heuristic_samples")) dev.heuristic_samples = m->count(1);
    if (auto m = d.get("seed")) dev.seed = m->seed();
    d.finish();
  }
  if (auto v = o.get("load_equilibrium")) s.load_equilibrium = v->string();
  o.finish();
}

inline json simulation_json(const SimulationConfig& s) {
  const auto& d = s.deviation;
  std::string mode = d.mode == DeviationMode::Auto ? "auto" : d.mode == DeviationMode::Exact ? "exact" : "heuristic";
  json j{{"runs", s.runs},
         {"seed", s.seed},
         {"rate_cap", s.rate_cap},
         {"eps_grid", s.eps_grid},
         {"quantile", s.quantile},
         {"deviation",
          {{"mode", mode},
           {"integrator", integrator_name(d.integrator)},
           {"heuristic_samples", d.heuristic_samples},
           {"seed", d.seed}}}};
  if (s.positions.empty())
    j["players"] = s.players;
  else
    j["positions"] = s.positions;
  if (s.load_equilibrium) j["load_equilibrium"] = *s.load_equilibrium;
  return j;
}

inline GraphonConfig parse_graphon(const Node& n) {
  ObjectNode o(n);
  GraphonConfig g;
  if (auto v = o.get("kernel")) g.kernel = parse_kernel(*v);
  if (auto v = o.get("n")) {
    g.n = v->counts(1);
    if (g.n.empty()) v->fail("expected at least one size");
  }
  if (auto v = o.get("seeds")) g.seeds = v->count(1);
  if (auto v = o.get("seed")) g.seed = v->seed();
  if (auto v = o.get("restarts")) g.restarts = v->count(1);
  o.finish();
  return g;
}

inline json graphon_json(const GraphonConfig& g) {
  return {{"kernel", kernel_json(g.kernel)}, {"n", g.n}, {"seeds", g.seeds}, {"seed", g.seed}, {"restarts", g.restarts}};
}

}  // namespace detail

/// Strict parse: unknown keys, wrong types and out-of-range values raise
/// ConfigError with the offending line.
inline ExperimentConfig parse_config(const JsonSource& src) {
  ExperimentConfig cfg;
  cfg.source = src.name();
  Node root(src, src.root(), "");
  ObjectNode o(root);
  try {
    if (auto m = o.get("model")) cfg.model = detail::parse_model(*m);
    if (auto s = o.get("solver")) detail::parse_solver(*s, cfg);
    if (auto s = o.get("simulation")) detail::parse_simulation(*s, cfg.simulation);
    if (auto g = o.get("graphon")) cfg.graphon = detail::parse_graphon(*g);
    if (auto m = o.get("monotonicity")) {
      ObjectNode mo(*m);
      if (auto v = mo.get("samples")) cfg.monotonicity.samples = v->count(1);
      if (auto v = mo.get("seed")) cfg.monotonicity.seed = v->seed();
      mo.finish();
    }
    if (auto out = o.get("output")) {
      ObjectNode oo(*out);
      if (auto v = oo.get("directory")) cfg.output.directory = v->string();
      if (auto v = oo.get("trajectories")) cfg.output.trajectories = v->boolean();
      oo.finish();
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidArgument& e) {
    // Library-side validation (e.g. a negative theta slope) without a node.
    throw ConfigError(src.name() + ":1: " + e.what());
  }
  o.finish();
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) { return parse_config(JsonSource::from_file(path)); }

/// Fully explicit document; parsing it yields the same normalized form.
inline json normalized(const ExperimentConfig& cfg) {
  json j;
  if (cfg.model) j["model"] = detail::model_json(*cfg.model);
  j["solver"] = detail::solver_json(cfg);
  j["simulation"] = detail::simulation_json(cfg.simulation);
  if (cfg.graphon) j["graphon"] = detail::graphon_json(*cfg.graphon);
  j["monotonicity"] = {{"samples", cfg.monotonicity.samples}, {"seed", cfg.monotonicity.seed}};
  j["output"] = {{"directory", cfg.output.directory}, {"trajectories", cfg.output.trajectories}};
  return j;
}

}  // namespace lrmfg::io
