#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sbp {

// One dynamic conditional branch. inst_gap counts the non-branch
// instructions retired since the previous record.
struct TraceRecord {
  std::uint64_t pc = 0;
  bool taken = false;
  std::uint32_t inst_gap = 0;

  bool operator==(const TraceRecord&) const = default;
};

struct Trace {
  std::vector<TraceRecord> records;
  std::string phase_id;
  // Always records.size() + sum of inst_gap; see recompute_total().
  std::uint64_t total_instructions = 0;

  std::uint64_t recompute_total() const;
  void push(std::uint64_t pc, bool taken, std::uint32_t inst_gap = 0);

  bool operator==(const Trace&) const = default;
};

class trace_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class truncated_trace_error : public trace_error {
 public:
  truncated_trace_error(const std::string& what, std::uint64_t offset)
      : trace_error(what), offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

// Binary trace format (little-endian):
//   header  "SBPT" | u16 version=1 | u16 reserved=0 | u64 total_instructions
//   record  u64 pc | u8 flags (bit0 = taken) | u8 gap [| u32 gap if gap byte == 255]
inline constexpr std::size_t kTraceHeaderBytes = 16;
inline constexpr std::uint16_t kTraceVersion = 1;

std::vector<std::uint8_t> encode_trace(const Trace& trace);
Trace decode_trace(std::span<const std::uint8_t> bytes, std::string phase_id = {});

// phase_id of the returned trace is the file stem.
Trace read_trace(const std::filesystem::path& path);
void write_trace(const Trace& trace, const std::filesystem::path& path);

}  // namespace sbp
