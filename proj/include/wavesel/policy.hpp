#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace wavesel {

// What a policy did at its most recent select_waveform call.
struct Decision {
  int wav = 0;
  bool explored = false;       // action drawn at random (schedule or unknown context)
  bool known_context = false;  // the context used had been visited before
  std::uint64_t context_hash = 0;
  int context_depth = 0;
  std::vector<double> predicted;  // model's next-observation distribution under wav
};

// Common action interface shared by the learners, the baselines and the oracle.
// Calls alternate: select_waveform(y_k) then observe_transition(y_k, w_k, g_k, y_{k+1}).
class WaveformPolicy {
 public:
  virtual ~WaveformPolicy() = default;
  virtual std::string_view name() const = 0;
  virtual int select_waveform(int obs) = 0;
  virtual void observe_transition(int obs, int wav, double cost, int next_obs) = 0;
  virtual std::size_t model_size() const { return 0; }
  const Decision& last_decision() const { return last_; }

 protected:
  Decision last_;
};

struct TraceRow {
  std::uint64_t k = 0;
  std::uint64_t context_hash = 0;
  int wav = 0;
  bool explored = false;
  double cost = 0;
};

// Decision trace CSV: k,context_hash,waveform,explored,cost
void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows);
std::vector<TraceRow> read_trace_csv(std::istream& is);

}  // namespace wavesel
