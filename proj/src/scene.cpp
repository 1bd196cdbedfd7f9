#include "wavesel/scene.hpp"

#include <algorithm>
#include <cmath>

#include "wavesel/errors.hpp"

namespace wavesel {
namespace {

constexpr std::size_t kMaxTableEntries = 50'000'000;

}  // namespace

double detection_probability(double sinr_db, double midpoint_db, double width_db) {
  return 1.0 / (1.0 + std::exp(-(sinr_db - midpoint_db) / width_db));
}

double SinrTable::lookup(int channel, int band) const {
  if (channel == band) return jammed_db;
  if (partial_adjacent && std::abs(channel - band) == 1) return partial_db;
  return clean_db;
}

std::string to_string(SceneKind kind) {
  switch (kind) {
    case SceneKind::kAdversarial: return "adversarial";
    case SceneKind::kMtd: return "mtd";
    case SceneKind::kTabular: return "tabular";
  }
  return "?";
}

SceneKind scene_kind_from_string(const std::string& s) {
  if (s == "adversarial") return SceneKind::kAdversarial;
  if (s == "mtd") return SceneKind::kMtd;
  if (s == "tabular") return SceneKind::kTabular;
  throw ConfigError("unknown scene kind: " + s);
}

int SceneSpec::order() const {
  switch (kind) {
    case SceneKind::kAdversarial: return 2;
    case SceneKind::kMtd: return static_cast<int>(lag_weights.size());
    case SceneKind::kTabular: return table.order;
  }
  return 1;
}

void SceneSpec::validate() const {
  if (n_channel < 1 || n_wav < 1 || n_quality < 1) throw ConfigError("scene alphabet sizes must be positive");
  if (grid_delay < 1 || grid_doppler < 1) throw ConfigError("target grid must be non-empty");
  auto prob = [](double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(what) + " must lie in [0, 1]");
  };
  prob(p_move, "p_move");
  prob(p_vanish, "p_vanish");
  prob(p_appear, "p_appear");
  prob(misread, "misread");
  prob(gate_pass, "gate_pass");
  if (misread > 0 && n_channel < 2) throw ConfigError("misread needs at least two channel states");
  switch (kind) {
    case SceneKind::kAdversarial:
      prob(p_adapt, "p_adapt");
      break;
    case SceneKind::kMtd: {
      if (lag_weights.empty()) throw ValidationError("mtd scene needs lag weights");
      double s = 0;
      for (double l : lag_weights) {
        if (!(l >= 0)) throw ValidationError("mtd lag weights must be non-negative");
        s += l;
      }
      if (std::abs(s - 1.0) > 1e-12) throw ValidationError("mtd lag weights must sum to one");
      const auto nc = static_cast<std::size_t>(n_channel);
      if (base.size() != nc * nc) throw ValidationError("mtd base table must be n_channel x n_channel");
      for (std::size_t r = 0; r < nc; ++r) {
        double t = 0;
        for (std::size_t c = 0; c < nc; ++c) {
          if (!(base[r * nc + c] >= 0)) throw ValidationError("mtd base table has a negative entry");
          t += base[r * nc + c];
        }
        if (std::abs(t - 1.0) > 1e-12) throw ValidationError("mtd base table row does not sum to one");
      }
      break;
    }
    case SceneKind::kTabular:
      if (table.n_channel != n_channel || table.n_wav != n_wav)
        throw ValidationError("tabular kernel alphabets differ from the scene");
      table.validate();
      break;
  }
}

Scene::Scene(SceneSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  kernel_ = build_kernel();
  kernel_.validate();
  target_table_ = target_kernel();
}

ChannelKernel Scene::build_kernel() const {
  ChannelKernel k;
  k.order = spec_.order();
  k.n_channel = spec_.n_channel;
  k.n_wav = spec_.n_wav;
  if (spec_.kind == SceneKind::kTabular) return spec_.table;
  const std::size_t rows = k.n_rows();
  if (rows * static_cast<std::size_t>(k.n_channel) > kMaxTableEntries)
    throw UnsupportedOperation("scene kernel is too large to tabulate");
  const auto nc = static_cast<std::size_t>(k.n_channel);
  k.table.assign(rows * nc, 0.0);
  const std::size_t w_rows = int_pow(static_cast<std::size_t>(k.n_wav), k.order);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto cs = decode_digits(r / w_rows, k.n_channel, k.order);
    const auto ws = decode_digits(r % w_rows, k.n_wav, k.order);
    double* row = &k.table[r * nc];
    if (spec_.kind == SceneKind::kMtd) {
      // lag j = 1 is the newest channel state
      for (std::size_t j = 0; j < spec_.lag_weights.size(); ++j) {
        const auto c = static_cast<std::size_t>(cs[cs.size() - 1 - j]);
        for (std::size_t i = 0; i < nc; ++i) row[i] += spec_.lag_weights[j] * spec_.base[c * nc + i];
      }
    } else {
      std::vector<double> score(nc, 0.0);
      score[static_cast<std::size_t>(band(ws[0]))] += spec_.weight_older;
      score[static_cast<std::size_t>(band(ws[1]))] += spec_.weight_newer;
      score[static_cast<std::size_t>(cs.back())] += spec_.weight_stay;
      const auto target = static_cast<std::size_t>(std::max_element(score.begin(), score.end()) - score.begin());
      for (std::size_t i = 0; i < nc; ++i) row[i] = (1.0 - spec_.p_adapt) / static_cast<double>(nc);
      row[target] += spec_.p_adapt;
    }
  }
  return k;
}

const ChannelKernel& Scene::true_kernel() const { return kernel_; }

std::vector<double> Scene::target_kernel() const {
  const int gd = spec_.grid_delay, gn = spec_.grid_doppler;
  const auto n = static_cast<std::size_t>(n_cells());
  std::vector<double> t(n * n, 0.0);
  const std::size_t absent = n - 1;
  for (int i = 0; i < gd; ++i) {
    for (int j = 0; j < gn; ++j) {
      const auto from = static_cast<std::size_t>(i * gn + j);
      double* row = &t[from * n];
      const double present = 1.0 - spec_.p_vanish;
      row[absent] += spec_.p_vanish;
      row[from] += present * (1.0 - spec_.p_move);
      const int di[4] = {-1, 1, 0, 0};
      const int dj[4] = {0, 0, -1, 1};
      for (int m = 0; m < 4; ++m) {
        const int ni = i + di[m], nj = j + dj[m];
        // moves into the grid edge leave the target where it is
        const auto to = (ni < 0 || ni >= gd || nj < 0 || nj >= gn) ? from : static_cast<std::size_t>(ni * gn + nj);
        row[to] += present * spec_.p_move / 4.0;
      }
    }
  }
  double* row = &t[absent * n];
  row[absent] = 1.0 - spec_.p_appear;
  for (std::size_t c = 0; c < absent; ++c) row[c] += spec_.p_appear / static_cast<double>(absent);
  return t;
}

double Scene::sinr_db(int channel, int wav) const { return spec_.sinr.lookup(channel, band(wav)); }

double Scene::p_quality(int channel, int wav, int q) const {
  const int nq = spec_.n_quality;
  if (nq == 1) return 1.0;
  const double good = detection_probability(sinr_db(channel, wav)) * spec_.gate_pass;
  if (q == nq - 1) return 1.0 - good;
  return good / static_cast<double>(nq - 1);
}

ObservationModel Scene::observation_model(std::vector<double> cost) const {
  ObservationModel m;
  m.n_channel = spec_.n_channel;
  m.n_wav = spec_.n_wav;
  m.n_quality = spec_.n_quality;
  const auto nc = static_cast<std::size_t>(m.n_channel);
  m.confusion.assign(nc * nc, 0.0);
  for (std::size_t c = 0; c < nc; ++c)
    for (std::size_t o = 0; o < nc; ++o)
      m.confusion[c * nc + o] = c == o ? 1.0 - spec_.misread : spec_.misread / static_cast<double>(nc - 1);
  for (int c = 0; c < m.n_channel; ++c)
    for (int w = 0; w < m.n_wav; ++w)
      for (int q = 0; q < m.n_quality; ++q) m.quality.push_back(p_quality(c, w, q));
  if (cost.size() != m.quality.size())
    throw ValidationError("cost table must have n_channel * n_wav * n_quality entries");
  m.cost = std::move(cost);
  return m;
}

void Scene::reset(Rng& rng) {
  const int u = order();
  c_hist_.clear();
  w_hist_.clear();
  for (int i = 0; i < u; ++i) c_hist_.push_back(uniform_int(rng, spec_.n_channel));
  for (int i = 0; i + 1 < u; ++i) w_hist_.push_back(uniform_int(rng, spec_.n_wav));
  target_ = uniform_int(rng, n_cells() - 1);
  ready_ = true;
}

void Scene::set_history(std::vector<int> c_hist, std::vector<int> w_hist, int target_cell) {
  if (static_cast<int>(c_hist.size()) != order() || static_cast<int>(w_hist.size()) != order() - 1)
    throw ContractViolation("scene history must hold U channel states and U-1 waveforms");
  c_hist_.assign(c_hist.begin(), c_hist.end());
  w_hist_.assign(w_hist.begin(), w_hist.end());
  target_ = target_cell;
  ready_ = true;
}

std::vector<double> Scene::next_channel_dist(int wav) const {
  if (!ready_) throw ContractViolation("scene history not padded; call reset first");
  std::vector<int> cs(c_hist_.begin(), c_hist_.end());
  std::vector<int> ws(w_hist_.begin(), w_hist_.end());
  ws.push_back(wav);
  const auto row = kernel_.row(cs, ws);
  return {row.begin(), row.end()};
}

std::vector<double> Scene::next_obs_dist(int wav) const {
  const auto pc = next_channel_dist(wav);
  const int nc = spec_.n_channel, nq = spec_.n_quality;
  std::vector<double> py(static_cast<std::size_t>(n_obs()), 0.0);
  for (int c = 0; c < nc; ++c)
    for (int o = 0; o < nc; ++o) {
      const double conf = c == o ? 1.0 - spec_.misread : spec_.misread / std::max(1, nc - 1);
      for (int q = 0; q < nq; ++q)
        py[static_cast<std::size_t>(o * nq + q)] += pc[static_cast<std::size_t>(c)] * conf * p_quality(c, wav, q);
    }
  return py;
}

SceneStep Scene::step(int wav, Rng& rng) {
  if (!ready_) throw ContractViolation("scene history not padded; call reset first");
  if (wav < 0 || wav >= spec_.n_wav) throw ValidationError("waveform out of range");
  // Fixed draw order keeps arms on common random numbers.
  const double u_channel = uniform01(rng);
  const double u_misread = uniform01(rng);
  const double u_quality = uniform01(rng);
  const double u_target = uniform01(rng);

  SceneStep out;
  const auto pc = next_channel_dist(wav);
  out.channel = sample_index(pc, u_channel);
  const int nc = spec_.n_channel;
  out.channel_observed = out.channel;
  if (spec_.misread > 0 && u_misread < spec_.misread) {
    const int shift = 1 + std::min(nc - 2, static_cast<int>(u_misread / spec_.misread * (nc - 1)));
    out.channel_observed = (out.channel + shift) % nc;
  }
  out.sinr_db = sinr_db(out.channel, wav);
  std::vector<double> pq(static_cast<std::size_t>(spec_.n_quality));
  for (int q = 0; q < spec_.n_quality; ++q) pq[static_cast<std::size_t>(q)] = p_quality(out.channel, wav, q);
  out.obs = out.channel_observed * spec_.n_quality + sample_index(pq, u_quality);

  const auto n = static_cast<std::size_t>(n_cells());
  std::span<const double> trow(&target_table_[static_cast<std::size_t>(target_) * n], n);
  target_ = sample_index(trow, u_target);
  out.target_cell = target_;

  c_hist_.push_back(out.channel);
  c_hist_.pop_front();
  w_hist_.push_back(wav);
  if (static_cast<int>(w_hist_.size()) > order() - 1) w_hist_.pop_front();
  return out;
}

}  // namespace wavesel
