// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "symse/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "symse/errors.hpp"

namespace symse::config {

namespace {

struct Field {
  KeyInfo info;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::size_t to_size(const std::string& s) {
  std::size_t v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw ContractError("expected a non-negative integer, got '" + s + "'");
  return v;
}

std::uint64_t to_u64(const std::string& s) {
  std::uint64_t v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw ContractError("expected a non-negative integer, got '" + s + "'");
  return v;
}

std::int64_t to_i64(const std::string& s) {
  std::int64_t v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ContractError("expected an integer, got '" + s + "'");
  return v;
}

double to_double(const std::string& s) {
  double v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ContractError("expected a number, got '" + s + "'");
  return v;
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ContractError("expected true or false, got '" + s + "'");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

template <typename T, typename F>
std::string join(const std::vector<T>& v, F f) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + f(v[i]);
  return out;
}

std::string size_list(const std::vector<std::size_t>& v) {
  return join(v, [](std::size_t x) { return std::to_string(x); });
}

std::vector<std::size_t> parse_size_list(const std::string& s) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(s)) out.push_back(to_size(item));
  return out;
}

// Integer fields that must be positive reject "-1" as a range error, not as
// a malformed token.
std::size_t positive(const std::string& s) {
  const auto v = to_i64(s);
  if (v < 1) throw ContractError("must be positive, got " + s);
  return static_cast<std::size_t>(v);
}

#define SIZE_FIELD(key, doc, member)                                                      \
  Field {                                                                                 \
    {key, "integer", doc}, [](const RunConfig& c) { return std::to_string(c.member); },   \
        [](RunConfig& c, const std::string& v) { c.member = to_size(v); }                 \
  }
#define POS_FIELD(key, doc, member)                                                       \
  Field {                                                                                 \
    {key, "integer", doc}, [](const RunConfig& c) { return std::to_string(c.member); },   \
        [](RunConfig& c, const std::string& v) { c.member = positive(v); }                \
  }
#define DOUBLE_FIELD(key, doc, member)                                                    \
  Field {                                                                                 \
    {key, "number", doc}, [](const RunConfig& c) { return fmt_double(c.member); },        \
        [](RunConfig& c, const std::string& v) { c.member = to_double(v); }               \
  }
#define BOOL_FIELD(key, doc, member)                                                              \
  Field {                                                                                         \
    {key, "bool", doc}, [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); }, \
        [](RunConfig& c, const std::string& v) { c.member = to_bool(v); }                         \
  }
#define LIST_FIELD(key, doc, member)                                                        \
  Field {                                                                                   \
    {key, "integer list", doc}, [](const RunConfig& c) { return size_list(c.member); },     \
        [](RunConfig& c, const std::string& v) { c.member = parse_size_list(v); }           \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      Field{{"model.variant", "unet|unet-mol|proposed|oracle", "model variant"},
            [](const RunConfig& c) { return model::variant_name(c.model.variant); },
            [](RunConfig& c, const std::string& v) { c.model.variant = model::parse_variant(v); }},
      POS_FIELD("model.segment_frames", "frames per training segment", model.segment_frames),
      LIST_FIELD("model.enc_channels", "encoder output channels per layer (placeholder defaults)", model.enc_channels),
      LIST_FIELD("model.enc_widths", "encoder kernel widths; empty derives 7,7,5,5", model.enc_widths),
      LIST_FIELD("model.dec_channels", "decoder output channels; empty mirrors the encoder", model.dec_channels),
      LIST_FIELD("model.dec_widths", "decoder kernel widths; empty derives 5,7,9,11", model.dec_widths),
      DOUBLE_FIELD("model.leaky_slope", "LeakyReLU negative slope", model.leaky_slope),
      POS_FIELD("model.symb_layers", "fully connected layers in the symbolic encoder", model.symb_layers),
      POS_FIELD("model.symb_hidden", "symbolic encoder hidden width", model.symb_hidden),
      DOUBLE_FIELD("model.dropout", "dropout rate in the symbolic encoder", model.dropout),
      POS_FIELD("model.context_width", "context conv kernel width", model.context_width),
      POS_FIELD("model.context_channels", "context conv output channels", model.context_channels),
      DOUBLE_FIELD("model.mol_weight", "auxiliary MFCC loss weight (unet-mol)", model.mol_weight),
      POS_FIELD("mha.heads", "attention heads", model.mha.heads),
      POS_FIELD("mha.key_dim", "query/key projection width", model.mha.key_dim),
      POS_FIELD("mha.value_dim", "value projection width", model.mha.value_dim),
      BOOL_FIELD("mha.positional", "add sinusoidal position codes", model.mha.positional),
      POS_FIELD("vq.book_size", "number of prototypes M", model.book_size),
      POS_FIELD("vq.code_dim", "prototype dimension D", model.code_dim),
      DOUBLE_FIELD("vq.commitment", "commitment loss weight lambda", model.commitment),
      DOUBLE_FIELD("vq.decay", "EMA decay gamma", model.ema_decay),
      Field{{"vq.init", "uniform|first-batch", "prototype initialization"},
            [](const RunConfig& c) {
              return std::string(c.train.book_init == BookInit::kUniform ? "uniform" : "first-batch");
            },
            [](RunConfig& c, const std::string& v) {
              if (v == "uniform")
                c.train.book_init = BookInit::kUniform;
              else if (v == "first-batch")
                c.train.book_init = BookInit::kFirstBatch;
              else
                throw ContractError("expected uniform or first-batch, got '" + v + "'");
            }},
      POS_FIELD("train.batch_size", "segments per minibatch", train.batch_size),
      DOUBLE_FIELD("train.lr", "Adam learning rate", train.adam.lr),
      DOUBLE_FIELD("train.beta1", "Adam beta1", train.adam.beta1),
      DOUBLE_FIELD("train.beta2", "Adam beta2", train.adam.beta2),
      DOUBLE_FIELD("train.epsilon", "Adam epsilon", train.adam.epsilon),
      POS_FIELD("train.max_epochs", "epoch cap", train.max_epochs),
      POS_FIELD("train.patience", "epochs without validation improvement before stopping", train.patience),
      Field{{"train.seed", "integer", "seed for initialization, mixing and shuffling"},
            [](const RunConfig& c) { return std::to_string(c.train.seed); },
            [](RunConfig& c, const std::string& v) { c.train.seed = to_u64(v); }},
      SIZE_FIELD("train.max_steps", "optimizer step cap; 0 disables", train.max_steps),
      BOOL_FIELD("train.double_precision", "train in 64-bit floating point", train.double_precision),
      Field{{"mix.snr_levels", "number list", "mixing SNRs in dB"},
            [](const RunConfig& c) { return join(c.mix.snr_levels, fmt_double); },
            [](RunConfig& c, const std::string& v) {
              c.mix.snr_levels.clear();
              for (const auto& item : split_list(v)) c.mix.snr_levels.push_back(to_double(item));
            }},
      BOOL_FIELD("mix.exhaustive", "mix every utterance at every level", mix.exhaustive),
      Field{{"norm.scope", "segment|utterance", "z-score statistics scope"},
            [](const RunConfig& c) {
              return std::string(c.features.scope == dsp::NormScope::kSegment ? "segment" : "utterance");
            },
            [](RunConfig& c, const std::string& v) {
              if (v == "segment")
                c.features.scope = dsp::NormScope::kSegment;
              else if (v == "utterance")
                c.features.scope = dsp::NormScope::kUtterance;
              else
                throw ContractError("expected segment or utterance, got '" + v + "'");
            }},
      BOOL_FIELD("norm.mfcc", "z-score the MFCC input", features.norm_mfcc),
      Field{{"stoi.sample_rate", "integer", "internal sample rate"},
            [](const RunConfig& c) { return std::to_string(c.stoi.sample_rate); },
            [](RunConfig& c, const std::string& v) { c.stoi.sample_rate = static_cast<int>(positive(v)); }},
      POS_FIELD("stoi.bands", "one-third octave bands", stoi.bands),
      DOUBLE_FIELD("stoi.min_freq", "centre of the lowest band in Hz", stoi.min_freq),
      POS_FIELD("stoi.frame", "frame length in samples", stoi.frame),
      POS_FIELD("stoi.fft", "FFT size", stoi.fft),
      POS_FIELD("stoi.segment", "frames per analysis segment", stoi.segment),
      DOUBLE_FIELD("stoi.beta_db", "lower SDR clipping bound", stoi.beta_db),
      DOUBLE_FIELD("stoi.dyn_range_db", "silence removal range", stoi.dyn_range_db),
      POS_FIELD("ssnr.frame", "frame length in samples", ssnr.frame),
      DOUBLE_FIELD("ssnr.floor_db", "per-frame lower clamp", ssnr.floor_db),
      DOUBLE_FIELD("ssnr.ceil_db", "per-frame upper clamp", ssnr.ceil_db),
      DOUBLE_FIELD("ssnr.silence_db", "frames this far below the loudest are skipped", ssnr.silence_db),
      DOUBLE_FIELD("interp.snr_db", "mixing SNR for token statistics", interp.snr_db),
  };
  return f;
}

#undef SIZE_FIELD
#undef POS_FIELD
#undef DOUBLE_FIELD
#undef BOOL_FIELD
#undef LIST_FIELD

const Field* find_field(const std::string& key) {
  for (const auto& f : fields())
    if (f.info.key == key) return &f;
  return nullptr;
}

// Cross-field checks; messages start with the key they concern.
void validate(RunConfig& c) {
  c.model = c.model.resolved();
  c.features.segment_frames = c.model.segment_frames;
  const auto& a = c.train.adam;
  SYMSE_REQUIRE(a.lr > 0.0, "train.lr: must be positive");
  SYMSE_REQUIRE(a.beta1 >= 0.0 && a.beta1 < 1.0, "train.beta1: must lie in [0, 1)");
  SYMSE_REQUIRE(a.beta2 >= 0.0 && a.beta2 < 1.0, "train.beta2: must lie in [0, 1)");
  SYMSE_REQUIRE(a.epsilon > 0.0, "train.epsilon: must be positive");
  SYMSE_REQUIRE(!c.mix.snr_levels.empty(), "mix.snr_levels: at least one level is required");
  SYMSE_REQUIRE(c.stoi.fft >= c.stoi.frame, "stoi.fft: must be at least stoi.frame");
  SYMSE_REQUIRE(c.ssnr.floor_db < c.ssnr.ceil_db, "ssnr.floor_db: must be below ssnr.ceil_db");
}

std::string located(const std::string& source, std::size_t line, const std::string& msg) {
  return source + ":" + std::to_string(line) + ": " + msg;
}

}  // namespace

const std::vector<KeyInfo>& schema() {
  static const std::vector<KeyInfo> s = [] {
    std::vector<KeyInfo> out;
    for (const auto& f : fields()) out.push_back(f.info);
    return out;
  }();
  return s;
}

RunConfig parse_config_text(const std::string& text, const std::string& source,
                            const std::vector<std::string>& overrides) {
  RunConfig c;
  std::map<std::string, std::string> where;  // key -> "source:line"
  auto apply = [&](const std::string& key, const std::string& value, const std::string& src, std::size_t line) {
    const auto* f = find_field(key);
    if (!f) throw ContractError(located(src, line, key + ": unknown key"));
    try {
      f->set(c, value);
    } catch (const ContractError& e) {
      throw ContractError(located(src, line, key + ": " + e.what()));
    }
    where[key] = located(src, line, "");
  };

  std::istringstream in(text);
  std::string raw, section;
  std::size_t n = 0;
  while (std::getline(in, raw)) {
    ++n;
    auto hash = raw.find('#');
    auto line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ContractError(located(source, n, "unterminated section header"));
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ContractError(located(source, n, "expected 'key = value'"));
    auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ContractError(located(source, n, "missing key"));
    if (!section.empty() && key.find('.') == std::string::npos) key = section + "." + key;
    apply(key, value, source, n);
  }
  for (std::size_t i = 0; i < overrides.size(); ++i) {
    const auto eq = overrides[i].find('=');
    if (eq == std::string::npos)
      throw ContractError(located("override", i + 1, "expected key=value, got '" + overrides[i] + "'"));
    apply(trim(overrides[i].substr(0, eq)), trim(overrides[i].substr(eq + 1)), "override", i + 1);
  }

  try {
    validate(c);
  } catch (const ContractError& e) {
    const std::string msg = e.what();
    const auto key = msg.substr(0, msg.find(':'));
    auto it = where.find(key);
    if (it != where.end()) throw ContractError(it->second + msg);
    throw ContractError(source + ": " + msg);
  }
  return c;
}

RunConfig parse_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string(), overrides);
}

std::string render(const RunConfig& config) {
  std::ostringstream out;
  std::string section;
  for (const auto& f : fields()) {
    const auto dot = f.info.key.find('.');
    const auto sec = f.info.key.substr(0, dot);
    if (sec != section) {
      out << (section.empty() ? "" : "\n") << '[' << sec << "]\n";
      section = sec;
    }
    out << f.info.key.substr(dot + 1) << " = " << f.get(config) << "  # " << f.info.doc << '\n';
  }
  return out.str();
}

void write_config(const std::filesystem::path& path, const RunConfig& config) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << render(config);
  out.close();
  if (!out) throw IoError("write failed for " + path.string());
}

std::map<std::string, std::string> flatten(const RunConfig& config) {
  std::map<std::string, std::string> out;
  for (const auto& f : fields()) out[f.info.key] = f.get(config);
  return out;
}

RunConfig unflatten(const std::map<std::string, std::string>& values) {
  std::vector<std::string> lines;
  for (const auto& [k, v] : values) lines.push_back(k + "=" + v);
  return parse_config_text("", "<flattened>", lines);
}

}  // namespace symse::config
