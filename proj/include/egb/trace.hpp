#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "egb/search.hpp"

namespace egb {

/// One token's uncertainty reading, flattened for serialization.
struct TraceRecord {
  int beam_id = 0;
  int step_index = 0;
  int token_position = 0;  // global across the beam's steps
  TokenId token_id = 0;
  std::string token_text;
  double entropy_bits = 0.0;
  double varentropy_bits2 = 0.0;
  bool branched = false;
  SamplerState sampler_state = SamplerState::certain;
  bool entropy_lower_bound = false;
};

/// Flattens a finished search into records ordered by (beam_id, token_position).
std::vector<TraceRecord> collect_trace(const SearchResult& result);

/// Writes one JSONL line per record. Returns the number of lines written.
long emit_trace(const SearchResult& result, std::ostream& sink);
long emit_trace(const std::vector<TraceRecord>& records, std::ostream& sink);

/// Parses a trace JSONL file. Malformed lines raise ParseError carrying the
/// 1-based line number.
std::vector<TraceRecord> read_trace_jsonl(const std::string& path);

struct RenderOptions {
  bool show_varentropy = true;
  bool mark_branches = true;
  double threshold_line = -1.0;  // tau; < 0 hides the line
  int width = 960;
  int height = 400;
};

/// Renders entropy (and optionally varentropy) vs token position as a
/// self-contained SVG. Byte-deterministic in its inputs. Throws ParameterError
/// on an empty record list ("no records").
std::string render_trace_svg(const std::vector<TraceRecord>& records,
                             const RenderOptions& options);

/// File-to-file convenience wrapper around read_trace_jsonl + render_trace_svg.
void render_trace(const std::string& trace_path, const std::string& out_path,
                  const RenderOptions& options);

}  // namespace egb
