#include "wavesel/policy.hpp"

#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "wavesel/errors.hpp"

namespace wavesel {

void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows) {
  os << "k,context_hash,waveform,explored,cost\n";
  for (const auto& r : rows)
    os << fmt::format("{},{:016x},{},{},{:.17g}\n", r.k, r.context_hash, r.wav, r.explored ? 1 : 0, r.cost);
}

std::vector<TraceRow> read_trace_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "k,context_hash,waveform,explored,cost")
    throw ValidationError("decision trace header missing");
  std::vector<TraceRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string f[5];
    for (auto& s : f)
      if (!std::getline(ls, s, ',')) throw ValidationError("short decision trace row: " + line);
    TraceRow r;
    try {
      r.k = std::stoull(f[0]);
      r.context_hash = std::stoull(f[1], nullptr, 16);
      r.wav = std::stoi(f[2]);
      r.explored = f[3] == "1";
      r.cost = std::stod(f[4]);
    } catch (const std::exception&) {
      throw ValidationError("malformed decision trace row: " + line);
    }
    rows.push_back(r);
  }
  return rows;
}

}  // namespace wavesel
