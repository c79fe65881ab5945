#include "sbp/trace.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include "byte_io.hpp"

namespace sbp {

std::uint64_t Trace::recompute_total() const {
  std::uint64_t total = records.size();
  for (const auto& r : records) total += r.inst_gap;
  return total;
}

void Trace::push(std::uint64_t pc, bool taken, std::uint32_t inst_gap) {
  records.push_back({pc, taken, inst_gap});
  total_instructions += 1 + std::uint64_t{inst_gap};
}

std::vector<std::uint8_t> encode_trace(const Trace& trace) {
  ByteWriter out;
  out.bytes("SBPT", 4);
  out.u16(kTraceVersion);
  out.u16(0);
  out.u64(trace.recompute_total());
  for (const auto& r : trace.records) {
    out.u64(r.pc);
    out.u8(r.taken ? 1 : 0);
    if (r.inst_gap < 255) {
      out.u8(static_cast<std::uint8_t>(r.inst_gap));
    } else {
      out.u8(255);
      out.u32(r.inst_gap);
    }
  }
  return out.take();
}

Trace decode_trace(std::span<const std::uint8_t> bytes, std::string phase_id) {
  if (bytes.size() < kTraceHeaderBytes)
    throw truncated_trace_error("trace header truncated", bytes.size());
  if (std::memcmp(bytes.data(), "SBPT", 4) != 0) throw trace_error("bad trace magic");
  ByteReader in(bytes);
  in.skip(4);
  const auto version = in.u16();
  if (version != kTraceVersion)
    throw trace_error("unsupported trace version " + std::to_string(version));
  in.u16();
  const std::uint64_t header_total = in.u64();

  Trace trace;
  trace.phase_id = std::move(phase_id);
  while (!in.done()) {
    const std::uint64_t offset = in.offset();
    if (in.remaining() < 10) throw truncated_trace_error("truncated trace record", offset);
    TraceRecord r;
    r.pc = in.u64();
    const auto flags = in.u8();
    if (flags & ~1u) throw trace_error("invalid record flags at offset " + std::to_string(offset));
    r.taken = flags & 1u;
    r.inst_gap = in.u8();
    if (r.inst_gap == 255) {
      if (in.remaining() < 4) throw truncated_trace_error("truncated gap escape", offset);
      r.inst_gap = in.u32();
    }
    trace.records.push_back(r);
  }
  trace.total_instructions = trace.recompute_total();
  if (trace.total_instructions != header_total)
    throw trace_error("header total_instructions " + std::to_string(header_total) +
                      " disagrees with records (" + std::to_string(trace.total_instructions) + ")");
  return trace;
}

Trace read_trace(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw trace_error("cannot open trace " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_trace(bytes, path.stem().string());
}

void write_trace(const Trace& trace, const std::filesystem::path& path) {
  const auto bytes = encode_trace(trace);
  write_file(path, bytes);
}

}  // namespace sbp
