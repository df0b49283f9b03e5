#include "lcshare/scenario.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "lcshare/errors.hpp"
#include "lcshare/rng.hpp"

namespace lcshare {

using nlohmann::json;

Scheme Scenario::primary_scheme() const {
  if (schemes.empty()) throw ValidationError("scenario: schemes must be nonempty");
  return schemes.front();
}

void Scenario::validate() const {
  driver.validate();
  follower.validate();
  rates.validate();
  obs.validate();
  td.validate();
  disturbance.validate();
  criterion.validate();
  if (!(v_star > 0.0)) throw ValidationError("scenario: v_star must be positive");
  if (!(dt > 0.0)) throw ValidationError("scenario: dt must be positive");
  if (!(horizon > dt)) throw ValidationError("scenario: horizon must exceed dt");
  if (schemes.empty()) throw ValidationError("scenario: schemes must be nonempty");
  if (seeds.empty()) throw ValidationError("scenario: seeds must be nonempty");
  if (beta < 0.0) throw ValidationError("scenario: beta must be nonnegative");
  for (double b : beta_grid)
    if (b <= 0.0) throw ValidationError("scenario: beta grid entries must be positive");
  for (double a : alpha_grid)
    if (a < 0.0 || a > 1.0) throw ValidationError("scenario: alpha grid entries must lie in [0,1]");
  for (double qq : q_grid)
    if (qq < 0.0) throw ValidationError("scenario: q grid entries must be nonnegative");
  for (double e : epsilon_grid)
    if (e <= 0.0) throw ValidationError("scenario: epsilon grid entries must be positive");
  if (!(event_opts.window > 0.0)) throw ValidationError("scenario: event window must be positive");
  if (event_opts.vehicle_length < 0.0)
    throw ValidationError("scenario: vehicle length must be nonnegative");
}

std::vector<std::uint64_t> derive_seeds(std::uint64_t master, std::size_t count) {
  std::vector<std::uint64_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = derive_seed(master, i);
  return out;
}

std::string resolve_path(const Scenario& s, const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_absolute() || s.base_dir.empty()) return path;
  return (std::filesystem::path(s.base_dir) / p).string();
}

namespace {

double get_num(const json& j, const char* key) {
  if (!j.contains(key)) throw ValidationError(std::string("scenario: missing field '") + key + "'");
  if (!j.at(key).is_number())
    throw ValidationError(std::string("scenario: field '") + key + "' must be a number");
  return j.at(key).get<double>();
}

double get_num_or(const json& j, const char* key, double fallback) {
  return j.contains(key) ? get_num(j, key) : fallback;
}

std::vector<double> get_grid(const json& j, const char* key) {
  if (!j.contains(key)) return {};
  if (!j.at(key).is_array())
    throw ValidationError(std::string("scenario: field '") + key + "' must be an array");
  return j.at(key).get<std::vector<double>>();
}

}  // namespace

Scenario scenario_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("scenario: top level must be a JSON object");
  Scenario s;
  s.name = j.value("name", std::string("scenario"));
  s.v_star = get_num(j, "v_star");

  if (!j.contains("driver")) throw ValidationError("scenario: missing field 'driver'");
  const json& d = j.at("driver");
  s.driver = DriverModel{get_num(d, "a1"), get_num(d, "b1"), get_num(d, "a2"), get_num(d, "b2"),
                         {get_num(d, "v_max"), get_num(d, "s_st"), get_num(d, "s_go")}};

  if (!j.contains("follower")) throw ValidationError("scenario: missing field 'follower'");
  const json& f = j.at("follower");
  s.follower = FollowerModel{get_num(f, "a"), get_num(f, "b"),
                             {get_num(f, "v_max"), get_num(f, "s_st"), get_num(f, "s_go")}};

  if (!j.contains("rates")) throw ValidationError("scenario: missing field 'rates'");
  s.rates = ModeRates{get_num(j.at("rates"), "lambda12"), get_num(j.at("rates"), "lambda21")};

  if (!j.contains("obs")) throw ValidationError("scenario: missing field 'obs'");
  s.obs = ObsParams{get_num(j.at("obs"), "alpha"), get_num(j.at("obs"), "q")};

  if (!j.contains("td")) throw ValidationError("scenario: missing field 'td'");
  const json& td = j.at("td");
  s.td = TdParams{get_num(td, "T_des"), get_num(td, "delta"), get_num(td, "zeta"),
                  get_num_or(td, "threshold", 1.0)};

  if (!j.contains("criterion")) throw ValidationError("scenario: missing field 'criterion'");
  const json& c = j.at("criterion");
  s.criterion =
      CompletionCriterion{get_num(c, "tau"), get_num(c, "s_rear_thr"), get_num(c, "s_front_thr")};

  s.disturbance = j.contains("disturbance") ? profile_from_json(j.at("disturbance"))
                                            : LeaderProfile::constant();

  if (j.contains("sim")) {
    const json& sim = j.at("sim");
    s.dt = get_num_or(sim, "dt", s.dt);
    s.horizon = get_num_or(sim, "horizon", s.horizon);
    if (sim.contains("mode_source")) {
      std::string src = sim.at("mode_source").get<std::string>();
      if (src == "markov")
        s.mode_source = ModeSource::markov;
      else if (src == "td")
        s.mode_source = ModeSource::td;
      else
        throw ValidationError("scenario: mode_source must be 'markov' or 'td'");
    }
    if (sim.contains("x0")) {
      std::vector<double> x = sim.at("x0").get<std::vector<double>>();
      if (x.size() != 4)
        throw ValidationError("scenario: x0 must hold [v_E, s_EL, v_F, s_FE]");
      s.x0 = PlantState{x[0], x[1], x[2], x[3]};
    }
  }

  s.schemes.clear();
  if (j.contains("schemes")) {
    for (const json& name : j.at("schemes"))
      s.schemes.push_back(scheme_from_string(name.get<std::string>()));
  } else if (j.contains("scheme")) {
    s.schemes.push_back(scheme_from_string(j.at("scheme").get<std::string>()));
  } else {
    s.schemes.push_back(Scheme::nominal_shared);
  }

  s.beta = get_num_or(j, "beta", 1.0);

  if (!j.contains("seeds")) throw ValidationError("scenario: missing field 'seeds'");
  const json& seeds = j.at("seeds");
  if (seeds.is_array()) {
    s.seeds = seeds.get<std::vector<std::uint64_t>>();
    if (!s.seeds.empty()) s.seed_master = s.seeds.front();
  } else if (seeds.is_object()) {
    s.seed_master = seeds.value("master", std::uint64_t{1});
    auto count = seeds.at("count").get<std::size_t>();
    s.seeds = derive_seeds(s.seed_master, count);
  } else {
    throw ValidationError("scenario: seeds must be an array or {count, master}");
  }

  s.beta_grid = get_grid(j, "beta_grid");
  s.alpha_grid = get_grid(j, "alpha_grid");
  s.q_grid = get_grid(j, "q_grid");
  s.epsilon_grid = get_grid(j, "epsilon_grid");

  s.event_file = j.value("event_file", std::string());
  s.data_file = j.value("data_file", std::string());
  s.event_opts.window = get_num_or(j, "event_window", s.event_opts.window);
  s.event_opts.vehicle_length = get_num_or(j, "vehicle_length", s.event_opts.vehicle_length);

  s.validate();
  return s;
}

json scenario_to_json(const Scenario& s) {
  json j;
  j["name"] = s.name;
  j["v_star"] = s.v_star;
  j["driver"] = {{"a1", s.driver.a1},
                 {"b1", s.driver.b1},
                 {"a2", s.driver.a2},
                 {"b2", s.driver.b2},
                 {"v_max", s.driver.curve.v_max},
                 {"s_st", s.driver.curve.s_st},
                 {"s_go", s.driver.curve.s_go}};
  j["follower"] = {{"a", s.follower.a},
                   {"b", s.follower.b},
                   {"v_max", s.follower.curve.v_max},
                   {"s_st", s.follower.curve.s_st},
                   {"s_go", s.follower.curve.s_go}};
  j["rates"] = {{"lambda12", s.rates.lambda12}, {"lambda21", s.rates.lambda21}};
  j["obs"] = {{"alpha", s.obs.alpha}, {"q", s.obs.q}};
  j["td"] = {{"T_des", s.td.T_des},
             {"delta", s.td.delta},
             {"zeta", s.td.zeta},
             {"threshold", s.td.threshold}};
  j["criterion"] = {{"tau", s.criterion.tau},
                    {"s_rear_thr", s.criterion.s_rear_thr},
                    {"s_front_thr", s.criterion.s_front_thr}};
  j["disturbance"] = profile_to_json(s.disturbance);
  j["sim"] = {{"dt", s.dt},
              {"horizon", s.horizon},
              {"mode_source", s.mode_source == ModeSource::markov ? "markov" : "td"}};
  if (s.x0)
    j["sim"]["x0"] = std::vector<double>{s.x0->v_E, s.x0->s_EL, s.x0->v_F, s.x0->s_FE};
  json names = json::array();
  for (Scheme sc : s.schemes) names.push_back(scheme_name(sc));
  j["schemes"] = names;
  j["beta"] = s.beta;
  j["seeds"] = s.seeds;
  if (!s.beta_grid.empty()) j["beta_grid"] = s.beta_grid;
  if (!s.alpha_grid.empty()) j["alpha_grid"] = s.alpha_grid;
  if (!s.q_grid.empty()) j["q_grid"] = s.q_grid;
  if (!s.epsilon_grid.empty()) j["epsilon_grid"] = s.epsilon_grid;
  if (!s.event_file.empty()) j["event_file"] = s.event_file;
  if (!s.data_file.empty()) j["data_file"] = s.data_file;
  j["event_window"] = s.event_opts.window;
  j["vehicle_length"] = s.event_opts.vehicle_length;
  return j;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("scenario: cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ValidationError("scenario: '" + path + "' is not valid JSON: " + e.what());
  }
  Scenario s = scenario_from_json(j);
  s.base_dir = std::filesystem::path(path).parent_path().string();
  return s;
}

}  // namespace lcshare
