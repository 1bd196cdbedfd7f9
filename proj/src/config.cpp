#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "wavesel/errors.hpp"
#include "wavesel/harness.hpp"

namespace wavesel {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError(fmt::format("{}: expected a number, got '{}'", key, v));
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long d = std::stoll(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError(fmt::format("{}: expected an integer, got '{}'", key, v));
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(fmt::format("{}: expected true/false, got '{}'", key, v));
}

std::vector<std::string> split(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& s : split(v)) out.push_back(to_double(key, s));
  return out;
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += fmt::format("{}{:.17g}", i ? "," : "", v[i]);
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"seed", [](auto& c, auto& k, auto& v) { c.seed = static_cast<std::uint64_t>(to_int(k, v)); }},
      {"tracks", [](auto& c, auto& k, auto& v) { c.tracks = static_cast<int>(to_int(k, v)); }},
      {"cpis", [](auto& c, auto& k, auto& v) { c.cpis = static_cast<int>(to_int(k, v)); }},
      {"pulses", [](auto& c, auto& k, auto& v) { c.pulses = static_cast<int>(to_int(k, v)); }},
      {"pri", [](auto& c, auto& k, auto& v) { c.pri = to_double(k, v); }},
      {"sample_rate", [](auto& c, auto& k, auto& v) { c.sample_rate = to_double(k, v); }},
      {"out_dir", [](auto& c, auto&, auto& v) { c.out_dir = v; }},
      {"arms",
       [](auto& c, auto&, auto& v) {
         c.arms.clear();
         for (const auto& a : split(v)) c.arms.push_back(arm_from_string(a));
       }},
      {"metrics.inaccuracy_eps", [](auto& c, auto& k, auto& v) { c.inaccuracy_eps = to_double(k, v); }},
      {"oracle.mode",
       [](auto& c, auto& k, auto& v) {
         if (v == "direct") c.oracle_mode = HiddenStateMode::kDirect;
         else if (v == "filtered") c.oracle_mode = HiddenStateMode::kFiltered;
         else throw ConfigError(k + ": expected direct or filtered");
       }},

      {"scene.kind", [](auto& c, auto&, auto& v) { c.scene.kind = scene_kind_from_string(v); }},
      {"scene.n_channel", [](auto& c, auto& k, auto& v) { c.scene.n_channel = static_cast<int>(to_int(k, v)); }},
      {"scene.n_wav", [](auto& c, auto& k, auto& v) { c.scene.n_wav = static_cast<int>(to_int(k, v)); }},
      {"scene.n_quality", [](auto& c, auto& k, auto& v) { c.scene.n_quality = static_cast<int>(to_int(k, v)); }},
      {"scene.p_adapt", [](auto& c, auto& k, auto& v) { c.scene.p_adapt = to_double(k, v); }},
      {"scene.weight_older", [](auto& c, auto& k, auto& v) { c.scene.weight_older = to_double(k, v); }},
      {"scene.weight_newer", [](auto& c, auto& k, auto& v) { c.scene.weight_newer = to_double(k, v); }},
      {"scene.weight_stay", [](auto& c, auto& k, auto& v) { c.scene.weight_stay = to_double(k, v); }},
      {"scene.lag_weights", [](auto& c, auto& k, auto& v) { c.scene.lag_weights = to_doubles(k, v); }},
      {"scene.base", [](auto& c, auto& k, auto& v) { c.scene.base = to_doubles(k, v); }},
      {"scene.misread", [](auto& c, auto& k, auto& v) { c.scene.misread = to_double(k, v); }},
      {"scene.gate_pass", [](auto& c, auto& k, auto& v) { c.scene.gate_pass = to_double(k, v); }},
      {"scene.sinr_clean_db", [](auto& c, auto& k, auto& v) { c.scene.sinr.clean_db = to_double(k, v); }},
      {"scene.sinr_partial_db", [](auto& c, auto& k, auto& v) { c.scene.sinr.partial_db = to_double(k, v); }},
      {"scene.sinr_jammed_db", [](auto& c, auto& k, auto& v) { c.scene.sinr.jammed_db = to_double(k, v); }},
      {"scene.partial_adjacent", [](auto& c, auto& k, auto& v) { c.scene.sinr.partial_adjacent = to_bool(k, v); }},
      {"scene.grid_delay", [](auto& c, auto& k, auto& v) { c.scene.grid_delay = static_cast<int>(to_int(k, v)); }},
      {"scene.grid_doppler", [](auto& c, auto& k, auto& v) { c.scene.grid_doppler = static_cast<int>(to_int(k, v)); }},
      {"scene.p_move", [](auto& c, auto& k, auto& v) { c.scene.p_move = to_double(k, v); }},
      {"scene.p_vanish", [](auto& c, auto& k, auto& v) { c.scene.p_vanish = to_double(k, v); }},
      {"scene.p_appear", [](auto& c, auto& k, auto& v) { c.scene.p_appear = to_double(k, v); }},

      {"learner.depth", [](auto& c, auto& k, auto& v) { c.learner.depth = static_cast<int>(to_int(k, v)); }},
      {"learner.gamma", [](auto& c, auto& k, auto& v) { c.learner.gamma = to_double(k, v); }},
      {"learner.exploration",
       [](auto& c, auto&, auto& v) { c.learner.exploration = ExplorationSchedule::parse(v); }},
      {"learner.restart",
       [](auto& c, auto& k, auto& v) {
         if (v == "slide") c.learner.restart = PhraseRestart::kSlide;
         else if (v == "reset") c.learner.restart = PhraseRestart::kReset;
         else throw ConfigError(k + ": expected slide or reset");
       }},
      {"learner.refresh", [](auto& c, auto& k, auto& v) { c.learner.refresh = static_cast<int>(to_int(k, v)); }},
      {"learner.persist", [](auto& c, auto& k, auto& v) { c.learner.persist = to_bool(k, v); }},

      {"cost.objective",
       [](auto& c, auto& k, auto& v) {
         if (v == "track") c.cost.objective = Objective::kTrack;
         else if (v == "entropy") c.cost.objective = Objective::kEntropy;
         else throw ConfigError(k + ": expected track or entropy");
       }},
      {"cost.lambda",
       [](auto& c, auto& k, auto& v) {
         const auto l = to_doubles(k, v);
         if (l.size() != 4) throw ConfigError(k + ": expected four entries (row-major 2x2)");
         c.cost.lambda << l[0], l[1], l[2], l[3];
       }},
      {"cost.nu_ref", [](auto& c, auto& k, auto& v) { c.cost.nu_ref = to_double(k, v); }},
      {"cost.g_max", [](auto& c, auto& k, auto& v) { c.cost.g_max = to_double(k, v); }},
      {"cost.detection_threshold", [](auto& c, auto& k, auto& v) { c.cost.detection_threshold = to_double(k, v); }},
      {"cost.softness", [](auto& c, auto& k, auto& v) { c.cost.softness = to_double(k, v); }},
      {"cost.entropy_sign", [](auto& c, auto& k, auto& v) { c.cost.entropy_sign = static_cast<int>(to_int(k, v)); }},

      {"tracker.carrier_hz", [](auto& c, auto& k, auto& v) { c.tracker.carrier_hz = to_double(k, v); }},
      {"tracker.snr_ref_db", [](auto& c, auto& k, auto& v) { c.tracker.snr_ref_db = to_double(k, v); }},
      {"tracker.accel_std", [](auto& c, auto& k, auto& v) { c.tracker.accel_std = to_double(k, v); }},
      {"tracker.range_min", [](auto& c, auto& k, auto& v) { c.tracker.range_min = to_double(k, v); }},
      {"tracker.range_max", [](auto& c, auto& k, auto& v) { c.tracker.range_max = to_double(k, v); }},
      {"tracker.rate_std", [](auto& c, auto& k, auto& v) { c.tracker.rate_std = to_double(k, v); }},
      {"tracker.init_range_std", [](auto& c, auto& k, auto& v) { c.tracker.init_range_std = to_double(k, v); }},
      {"tracker.init_rate_std", [](auto& c, auto& k, auto& v) { c.tracker.init_rate_std = to_double(k, v); }},
      {"tracker.quality_bins", [](auto& c, auto& k, auto& v) { c.tracker.quality_bins = to_doubles(k, v); }},
  };
  return table;
}

std::string restart_name(PhraseRestart r) { return r == PhraseRestart::kSlide ? "slide" : "reset"; }

}  // namespace

ExperimentConfig parse_config(std::istream& is) {
  ExperimentConfig cfg;
  std::map<int, WaveformSpec> library;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("line {}: expected key = value", lineno));
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.rfind("waveform.", 0) == 0) {
      const auto idx = to_int(key, key.substr(9));
      if (idx < 0) throw ConfigError(key + ": negative waveform index");
      library[static_cast<int>(idx)] = WaveformSpec::parse(value);
      continue;
    }
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError(fmt::format("line {}: unknown key '{}'", lineno, key));
    it->second(cfg, key, value);
  }
  for (const auto& [i, spec] : library) {
    if (i != static_cast<int>(cfg.library.size())) throw ConfigError("waveform indices must be 0, 1, 2, ...");
    cfg.library.push_back(spec);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_config(in);
}

std::string config_to_text(const ExperimentConfig& c) {
  std::string arms;
  for (std::size_t i = 0; i < c.arms.size(); ++i) arms += (i ? "," : "") + arm_name(c.arms[i]);
  std::string out;
  auto put = [&](std::string_view k, const std::string& v) { out += fmt::format("{} = {}\n", k, v); };
  auto num = [](double v) { return fmt::format("{:.17g}", v); };
  put("seed", std::to_string(c.seed));
  put("tracks", std::to_string(c.tracks));
  put("cpis", std::to_string(c.cpis));
  put("pulses", std::to_string(c.pulses));
  put("pri", num(c.pri));
  put("sample_rate", num(c.sample_rate));
  put("out_dir", c.out_dir);
  put("arms", arms);
  put("metrics.inaccuracy_eps", num(c.inaccuracy_eps));
  put("oracle.mode", c.oracle_mode == HiddenStateMode::kDirect ? "direct" : "filtered");
  const auto& s = c.scene;
  put("scene.kind", to_string(s.kind));
  put("scene.n_channel", std::to_string(s.n_channel));
  put("scene.n_wav", std::to_string(s.n_wav));
  put("scene.n_quality", std::to_string(s.n_quality));
  put("scene.p_adapt", num(s.p_adapt));
  put("scene.weight_older", num(s.weight_older));
  put("scene.weight_newer", num(s.weight_newer));
  put("scene.weight_stay", num(s.weight_stay));
  put("scene.lag_weights", join(s.lag_weights));
  if (!s.base.empty()) put("scene.base", join(s.base));
  put("scene.misread", num(s.misread));
  put("scene.gate_pass", num(s.gate_pass));
  put("scene.sinr_clean_db", num(s.sinr.clean_db));
  put("scene.sinr_partial_db", num(s.sinr.partial_db));
  put("scene.sinr_jammed_db", num(s.sinr.jammed_db));
  put("scene.partial_adjacent", s.sinr.partial_adjacent ? "true" : "false");
  put("scene.grid_delay", std::to_string(s.grid_delay));
  put("scene.grid_doppler", std::to_string(s.grid_doppler));
  put("scene.p_move", num(s.p_move));
  put("scene.p_vanish", num(s.p_vanish));
  put("scene.p_appear", num(s.p_appear));
  put("learner.depth", std::to_string(c.learner.depth));
  put("learner.gamma", num(c.learner.gamma));
  put("learner.exploration", c.learner.exploration.to_string());
  put("learner.restart", restart_name(c.learner.restart));
  put("learner.refresh", std::to_string(c.learner.refresh));
  put("learner.persist", c.learner.persist ? "true" : "false");
  put("cost.objective", c.cost.objective == Objective::kTrack ? "track" : "entropy");
  const auto& l = c.cost.lambda;
  put("cost.lambda", join({l(0, 0), l(0, 1), l(1, 0), l(1, 1)}));
  put("cost.nu_ref", num(c.cost.nu_ref));
  put("cost.g_max", num(c.cost.g_max));
  put("cost.detection_threshold", num(c.cost.detection_threshold));
  put("cost.softness", num(c.cost.softness));
  put("cost.entropy_sign", std::to_string(c.cost.entropy_sign));
  put("tracker.carrier_hz", num(c.tracker.carrier_hz));
  put("tracker.snr_ref_db", num(c.tracker.snr_ref_db));
  put("tracker.accel_std", num(c.tracker.accel_std));
  put("tracker.range_min", num(c.tracker.range_min));
  put("tracker.range_max", num(c.tracker.range_max));
  put("tracker.rate_std", num(c.tracker.rate_std));
  put("tracker.init_range_std", num(c.tracker.init_range_std));
  put("tracker.init_rate_std", num(c.tracker.init_rate_std));
  if (!c.tracker.quality_bins.empty()) put("tracker.quality_bins", join(c.tracker.quality_bins));
  for (std::size_t i = 0; i < c.library.size(); ++i) put(fmt::format("waveform.{}", i), c.library[i].to_string());
  return out;
}

void ExperimentConfig::validate() const {
  if (tracks < 1 || cpis < 1) throw ConfigError("tracks and cpis must be positive");
  if (pulses < 1 || !(pri > 0)) throw ConfigError("pulses and pri must be positive");
  if (arms.empty()) throw ConfigError("at least one algorithm arm is required");
  if (!(sample_rate >= 0)) throw ConfigError("sample_rate must be non-negative");
  if (!(inaccuracy_eps >= 0 && inaccuracy_eps <= 1)) throw ConfigError("inaccuracy_eps must lie in [0, 1]");
  scene.validate();
  cost.validate();
  if (learner.depth < 1) throw ConfigError("learner depth must be at least 1");
  if (!(learner.gamma >= 0 && learner.gamma < 1)) throw ConfigError("learner gamma must lie in [0, 1)");
  if (learner.refresh < 1) throw ConfigError("learner refresh must be positive");
  if (static_cast<int>(library.size()) != scene.n_wav)
    throw ConfigError(fmt::format("waveform library has {} entries but the scene has {} waveforms", library.size(),
                                  scene.n_wav));
  for (const auto& w : library) {
    auto cpi = w;
    cpi.pulses = pulses;
    cpi.pri = pri;
    try {
      cpi.validate();
    } catch (const ValidationError& e) {
      throw ConfigError(std::string("waveform: ") + e.what());
    }
  }
  if (static_cast<int>(tracker.quality_bins.size()) != scene.n_quality - 1)
    throw ConfigError("tracker.quality_bins must hold n_quality - 1 thresholds");
  if (!std::is_sorted(tracker.quality_bins.begin(), tracker.quality_bins.end()))
    throw ConfigError("tracker.quality_bins must be ascending");
  if (!(tracker.carrier_hz > 0) || !(tracker.accel_std >= 0) || !(tracker.range_max >= tracker.range_min))
    throw ConfigError("tracker parameters out of range");
}

}  // namespace wavesel
