#include "egb/trace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace egb {

namespace {

SamplerState sampler_state_from_string(const std::string& s) {
  if (s == "certain") return SamplerState::certain;
  if (s == "uncertain") return SamplerState::uncertain;
  if (s == "branch_point") return SamplerState::branch_point;
  throw ParseError("unknown sampler_state \"" + s + "\"");
}

nlohmann::json to_json(const TraceRecord& r) {
  return {{"beam_id", r.beam_id},
          {"step_index", r.step_index},
          {"token_position", r.token_position},
          {"token_id", r.token_id},
          {"token_text", r.token_text},
          {"entropy_bits", r.entropy_bits},
          {"varentropy_bits2", r.varentropy_bits2},
          {"branched", r.branched},
          {"sampler_state", to_string(r.sampler_state)},
          {"entropy_lower_bound", r.entropy_lower_bound}};
}

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

}  // namespace

std::vector<TraceRecord> collect_trace(const SearchResult& result) {
  std::vector<TraceRecord> out;
  for (const Beam& beam : result.all_beams) {
    int position = 0;
    for (const TokenTrace& t : beam.trace) {
      TraceRecord r;
      r.beam_id = beam.id;
      r.step_index = t.step_index;
      r.token_position = position++;
      r.token_id = t.token_id;
      r.token_text = t.token_text;
      r.entropy_bits = t.entropy_bits;
      r.varentropy_bits2 = t.varentropy_bits2;
      r.branched = t.branched;
      r.sampler_state = t.state;
      r.entropy_lower_bound = t.entropy_lower_bound;
      out.push_back(std::move(r));
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const TraceRecord& a, const TraceRecord& b) {
    if (a.beam_id != b.beam_id) return a.beam_id < b.beam_id;
    return a.token_position < b.token_position;
  });
  return out;
}

long emit_trace(const std::vector<TraceRecord>& records, std::ostream& sink) {
  long count = 0;
  for (const auto& r : records) {
    sink << to_json(r).dump() << '\n';
    ++count;
  }
  if (!sink) throw Error("trace sink write failure");
  return count;
}

long emit_trace(const SearchResult& result, std::ostream& sink) {
  return emit_trace(collect_trace(result), sink);
}

std::vector<TraceRecord> read_trace_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open trace file " + path);
  std::vector<TraceRecord> out;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("malformed trace line: ") + e.what(), line_no);
    }
    try {
      TraceRecord r;
      r.beam_id = j.at("beam_id").get<int>();
      r.step_index = j.at("step_index").get<int>();
      r.token_position = j.at("token_position").get<int>();
      r.token_id = j.at("token_id").get<TokenId>();
      r.token_text = j.at("token_text").get<std::string>();
      r.entropy_bits = j.at("entropy_bits").get<double>();
      r.varentropy_bits2 = j.at("varentropy_bits2").get<double>();
      r.branched = j.at("branched").get<bool>();
      r.sampler_state = sampler_state_from_string(j.at("sampler_state").get<std::string>());
      r.entropy_lower_bound = j.at("entropy_lower_bound").get<bool>();
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("malformed trace line: ") + e.what(), line_no);
    }
  }
  return out;
}

std::string render_trace_svg(const std::vector<TraceRecord>& records,
                             const RenderOptions& options) {
  if (records.empty()) throw ParameterError("no records");

  const double margin_left = 56.0, margin_right = 16.0;
  const double margin_top = 24.0, margin_bottom = 40.0;
  const double plot_w = options.width - margin_left - margin_right;
  const double plot_h = options.height - margin_top - margin_bottom;

  int max_pos = 0;
  double max_y = options.threshold_line > 0.0 ? options.threshold_line : 0.0;
  std::map<int, std::vector<const TraceRecord*>> by_beam;
  for (const auto& r : records) {
    max_pos = std::max(max_pos, r.token_position);
    max_y = std::max(max_y, r.entropy_bits);
    if (options.show_varentropy) max_y = std::max(max_y, r.varentropy_bits2);
    by_beam[r.beam_id].push_back(&r);
  }
  if (max_y <= 0.0) max_y = 1.0;
  max_y *= 1.08;  // headroom so the highest point is not clipped

  auto sx = [&](int pos) {
    return margin_left + (max_pos == 0 ? 0.0 : plot_w * pos / max_pos);
  };
  auto sy = [&](double v) { return margin_top + plot_h * (1.0 - v / max_y); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << options.width
      << "\" height=\"" << options.height << "\" viewBox=\"0 0 " << options.width << " "
      << options.height << "\">\n";
  svg << "<rect width=\"" << options.width << "\" height=\"" << options.height
      << "\" fill=\"#ffffff\"/>\n";
  // Axes.
  svg << "<line x1=\"" << fmt2(margin_left) << "\" y1=\"" << fmt2(margin_top) << "\" x2=\""
      << fmt2(margin_left) << "\" y2=\"" << fmt2(margin_top + plot_h)
      << "\" stroke=\"#333333\"/>\n";
  svg << "<line x1=\"" << fmt2(margin_left) << "\" y1=\"" << fmt2(margin_top + plot_h)
      << "\" x2=\"" << fmt2(margin_left + plot_w) << "\" y2=\"" << fmt2(margin_top + plot_h)
      << "\" stroke=\"#333333\"/>\n";
  svg << "<text x=\"" << fmt2(margin_left + plot_w / 2.0) << "\" y=\""
      << fmt2(options.height - 8.0)
      << "\" font-size=\"12\" text-anchor=\"middle\">token position</text>\n";
  svg << "<text x=\"14\" y=\"" << fmt2(margin_top + plot_h / 2.0)
      << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
      << fmt2(margin_top + plot_h / 2.0) << ")\">bits</text>\n";

  if (options.threshold_line >= 0.0) {
    const double y = sy(options.threshold_line);
    svg << "<line class=\"threshold\" x1=\"" << fmt2(margin_left) << "\" y1=\"" << fmt2(y)
        << "\" x2=\"" << fmt2(margin_left + plot_w) << "\" y2=\"" << fmt2(y)
        << "\" stroke=\"#666666\" stroke-dasharray=\"6 3\"/>\n";
    svg << "<text x=\"" << fmt2(margin_left + plot_w - 4.0) << "\" y=\"" << fmt2(y - 4.0)
        << "\" font-size=\"11\" text-anchor=\"end\" fill=\"#666666\">tau = "
        << fmt2(options.threshold_line) << "</text>\n";
  }

  int beam_idx = 0;
  for (const auto& [beam_id, recs] : by_beam) {
    const char* color = kPalette[beam_idx % (sizeof(kPalette) / sizeof(kPalette[0]))];
    ++beam_idx;
    std::ostringstream entropy_pts, varentropy_pts;
    for (const auto* r : recs) {
      entropy_pts << fmt2(sx(r->token_position)) << "," << fmt2(sy(r->entropy_bits)) << " ";
      varentropy_pts << fmt2(sx(r->token_position)) << "," << fmt2(sy(r->varentropy_bits2))
                     << " ";
    }
    svg << "<polyline class=\"entropy\" fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\" points=\"" << entropy_pts.str() << "\"/>\n";
    if (options.show_varentropy) {
      svg << "<polyline class=\"varentropy\" fill=\"none\" stroke=\"" << color
          << "\" stroke-width=\"1\" stroke-dasharray=\"3 2\" points=\""
          << varentropy_pts.str() << "\"/>\n";
    }
    if (options.mark_branches) {
      for (const auto* r : recs) {
        if (!r->branched) continue;
        svg << "<circle class=\"branch-marker\" cx=\"" << fmt2(sx(r->token_position))
            << "\" cy=\"" << fmt2(sy(r->entropy_bits)) << "\" r=\"4\" fill=\"" << color
            << "\" stroke=\"#000000\"/>\n";
      }
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

void render_trace(const std::string& trace_path, const std::string& out_path,
                  const RenderOptions& options) {
  auto records = read_trace_jsonl(trace_path);
  const std::string svg = render_trace_svg(records, options);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw Error("cannot open output file " + out_path);
  out << svg;
  if (!out) throw Error("render write failure for " + out_path);
}

}  // namespace egb
