// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "symse/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "symse/enhance.hpp"
#include "symse/errors.hpp"
#include "symse/interp.hpp"
#include "symse/synth.hpp"
#include "symse/trainer.hpp"

namespace symse::cli {

namespace fs = std::filesystem;

namespace {

constexpr char kMixedHeader[] = "id\tsplit\tsnr_db\tmeasured_snr_db\tnoise\tclean\tnoisy\tlabels";

std::vector<double> parse_levels(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ContractError("--snr: '" + item + "' is not a number");
    }
  }
  if (out.empty()) throw ContractError("--snr: empty level list");
  return out;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

std::vector<fs::path> wav_files(const fs::path& in) {
  if (fs::is_regular_file(in)) return {in};
  if (!fs::is_directory(in)) throw DataError(in.string() + ": no such file or directory");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(in))
    if (e.is_regular_file() && e.path().extension() == ".wav") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw DataError(in.string() + ": no .wav files");
  return out;
}

labels::PhoneFolding folding_from(const std::string& path) {
  return path.empty() ? labels::PhoneFolding() : labels::PhoneFolding::from_file(path);
}

config::RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  if (path.empty()) return config::parse_config_text("", "<defaults>", overrides);
  return config::parse_config(path, overrides);
}

std::vector<pipeline::MixedUtterance> mix_split(const std::vector<pipeline::ManifestEntry>& entries,
                                                pipeline::Split split, const pipeline::MixConfig& mix,
                                                std::uint64_t seed, std::ostream& err) {
  auto chosen = pipeline::select_split(entries, split);
  return pipeline::mix_entries(chosen, pipeline::noise_pool(entries), mix,
                               pipeline::derive_seed(seed, 3 + static_cast<std::uint64_t>(split)),
                               [&err](const std::string& m) { err << "warning: " << m << '\n'; });
}

// mix --------------------------------------------------------------------

struct MixArgs {
  std::string manifest, out, snr = "20,15,10,5,0,-5", split = "all";
  std::uint64_t seed = 1;
  bool exhaustive = false;
};

int cmd_mix(const MixArgs& a, std::ostream& out, std::ostream& err) {
  auto entries = pipeline::read_manifest(a.manifest);
  pipeline::MixConfig mix{parse_levels(a.snr), a.exhaustive};
  std::vector<pipeline::Split> splits;
  if (a.split == "all")
    splits = {pipeline::Split::kTrain, pipeline::Split::kValid, pipeline::Split::kTest};
  else
    splits = {pipeline::parse_split(a.split)};

  const fs::path dir(a.out);
  ensure_dir(dir / "clean");
  ensure_dir(dir / "noisy");
  std::ofstream tsv(dir / "mixed.tsv");
  if (!tsv) throw IoError("cannot write " + (dir / "mixed.tsv").string());
  tsv << kMixedHeader << '\n' << std::setprecision(17);
  std::size_t count = 0;
  for (auto split : splits) {
    for (const auto& m : mix_split(entries, split, mix, a.seed, err)) {
      std::vector<double> resid(m.clean.samples.size());
      for (std::size_t i = 0; i < resid.size(); ++i) resid[i] = m.noisy.samples[i] - m.clean.samples[i];
      const auto clean_out = dir / "clean" / (m.id + ".wav");
      const auto noisy_out = dir / "noisy" / (m.id + ".wav");
      dsp::write_wav(clean_out, m.clean);
      dsp::write_wav(noisy_out, m.noisy);
      tsv << m.id << '\t' << pipeline::split_name(split) << '\t' << m.snr_db << '\t'
          << dsp::snr_db(m.clean.samples, resid) << '\t' << m.noise_path.stem().string() << '\t'
          << fs::relative(clean_out, dir).generic_string() << '\t' << fs::relative(noisy_out, dir).generic_string()
          << '\t' << (m.labels_path.empty() ? std::string("-") : m.labels_path.string()) << '\n';
      ++count;
    }
  }
  if (!tsv) throw IoError("write failed: " + (dir / "mixed.tsv").string());
  out << "mixed " << count << " utterances into " << dir.string() << '\n';
  return kExitOk;
}

// train ------------------------------------------------------------------

struct TrainArgs {
  std::string manifest, config, out, folding;
  std::vector<std::string> set;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  auto cfg = load_config(a.config, a.set);
  auto entries = pipeline::read_manifest(a.manifest);
  const auto folding = folding_from(a.folding);
  auto warn = [&err](const std::string& m) { err << "warning: " << m << '\n'; };
  auto build = [&](pipeline::Split split) {
    auto mixed = mix_split(entries, split, cfg.mix, cfg.train.seed, err);
    if (mixed.empty())
      throw DataError(a.manifest + ": no usable " + pipeline::split_name(split) + " utterances");
    return pipeline::build_dataset(mixed, cfg.features, folding, warn);
  };
  const auto train_set = build(pipeline::Split::kTrain);
  const auto valid_set = build(pipeline::Split::kValid);
  if (train_set.segments.empty() || valid_set.segments.empty())
    throw DataError(a.manifest + ": no training or validation segments");

  const fs::path ckpt(a.out);
  if (ckpt.has_parent_path()) ensure_dir(ckpt.parent_path());
  auto config_path = ckpt;
  config_path.replace_extension(".ini");
  auto log_path = ckpt;
  log_path.replace_extension(".log.csv");
  config::write_config(config_path, cfg);

  if (!a.quiet)
    out << "train: " << train_set.segments.size() << " segments, valid: " << valid_set.segments.size()
        << " segments, variant " << model::variant_name(cfg.model.variant) << '\n';
  pipeline::TrainHooks hooks;
  hooks.on_epoch = [&](const pipeline::EpochLog& e) {
    if (!a.quiet) out << pipeline::format_epoch(e) << '\n' << std::flush;
  };
  auto result = pipeline::train(train_set, valid_set, cfg, hooks);
  pipeline::save_checkpoint(result.best, ckpt);
  std::ofstream log(log_path);
  if (!log) throw IoError("cannot write " + log_path.string());
  pipeline::write_epoch_log(log, result.log);
  if (!log) throw IoError("write failed: " + log_path.string());
  out << "best epoch " << result.best.epoch << " valid_mse " << std::setprecision(9) << result.best.best_valid
      << (result.early_stopped ? " (early stop)" : "") << "\nwrote " << ckpt.string() << ", "
      << log_path.string() << ", " << config_path.string() << '\n';
  return kExitOk;
}

// enhance ----------------------------------------------------------------

struct EnhanceArgs {
  std::string ckpt, in, out, labels, folding;
};

int cmd_enhance(const EnhanceArgs& a, std::ostream& out) {
  const auto ckpt = pipeline::load_checkpoint(a.ckpt);
  const auto files = wav_files(a.in);
  const auto folding = folding_from(a.folding);
  const fs::path dir(a.out);
  ensure_dir(dir);
  for (const auto& f : files) {
    const auto noisy = dsp::read_wav(f);
    std::vector<std::int32_t> classes;
    if (!a.labels.empty()) {
      const auto phn = fs::path(a.labels) / (f.stem().string() + ".phn");
      if (!fs::exists(phn)) throw DataError(f.string() + ": no label file " + phn.string());
      classes = labels::frame_labels(labels::read_phn(phn), dsp::frame_count(noisy.samples.size()), folding);
    }
    dsp::write_wav(dir / f.filename(), pipeline::enhance_utterance(noisy, ckpt, classes));
  }
  out << "enhanced " << files.size() << " files into " << dir.string() << '\n';
  return kExitOk;
}

// eval -------------------------------------------------------------------

struct EvalArgs {
  std::string clean, degraded, noisy, mixed, out, config;
};

struct MixedInfo {
  std::string snr, noise;
};

std::map<std::string, MixedInfo> read_mixed(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::map<std::string, MixedInfo> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream s(line);
    std::string field;
    while (std::getline(s, field, '\t')) f.push_back(field);
    if (f.size() != 8) throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected 8 fields");
    out[f[0]] = {f[2], f[4]};
  }
  return out;
}

dsp::Waveform read_pair(const fs::path& dir, const fs::path& name, const char* role) {
  const auto p = dir / name;
  if (!fs::exists(p)) throw DataError(name.string() + ": no " + role + " file " + p.string());
  return dsp::read_wav(p);
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const auto cfg = load_config(a.config, {});
  const fs::path clean_dir(a.clean), deg_dir(a.degraded), noisy_dir(a.noisy.empty() ? a.degraded : a.noisy);
  const auto files = wav_files(deg_dir);
  std::map<std::string, MixedInfo> info;
  if (!a.mixed.empty()) info = read_mixed(a.mixed);

  std::ofstream csv(a.out);
  if (!csv) throw IoError("cannot write " + a.out);
  csv << "utterance,snr_db,noise,stoi_noisy,stoi_enhanced,ssnr_noisy,ssnr_enhanced\n" << std::setprecision(17);
  double sums[4] = {0, 0, 0, 0};
  for (const auto& f : files) {
    const auto name = f.filename();
    const auto id = f.stem().string();
    const auto clean = read_pair(clean_dir, name, "clean");
    const auto enhanced = dsp::read_wav(f);
    const auto noisy = read_pair(noisy_dir, name, "noisy");
    double v[4];
    try {
      v[0] = metrics::stoi(clean, noisy, cfg.stoi);
      v[1] = metrics::stoi(clean, enhanced, cfg.stoi);
      v[2] = metrics::segmental_snr(clean, noisy, cfg.ssnr);
      v[3] = metrics::segmental_snr(clean, enhanced, cfg.ssnr);
    } catch (const ContractError& ex) {
      throw DataError(id + ": " + ex.what());
    }
    auto it = info.find(id);
    csv << id << ',' << (it == info.end() ? "nan" : it->second.snr) << ','
        << (it == info.end() ? "-" : it->second.noise);
    for (int k = 0; k < 4; ++k) {
      csv << ',' << v[k];
      sums[k] += v[k];
    }
    csv << '\n';
  }
  if (!csv) throw IoError("write failed: " + a.out);
  const double n = static_cast<double>(files.size());
  out << std::fixed << std::setprecision(4) << files.size() << " utterances: stoi " << sums[0] / n << " -> "
      << sums[1] / n << ", ssnr " << sums[2] / n << " -> " << sums[3] / n << " dB\n";
  return kExitOk;
}

// interpret --------------------------------------------------------------

struct InterpArgs {
  std::string ckpt, manifest, out, split = "test", folding;
  double snr = std::nan("");
  std::uint64_t seed = 1;
};

int cmd_interpret(const InterpArgs& a, std::ostream& out, std::ostream& err) {
  const auto ckpt = pipeline::load_checkpoint(a.ckpt);
  if (!ckpt.config.model.quantizes())
    throw ContractError("interpret: the " + model::variant_name(ckpt.config.model.variant) +
                        " variant has no symbolic book");
  auto entries = pipeline::read_manifest(a.manifest);
  std::vector<pipeline::ManifestEntry> chosen;
  for (const auto& e : entries)
    if (!e.labels.empty() && (a.split == "all" || e.split == pipeline::parse_split(a.split))) chosen.push_back(e);
  if (chosen.empty()) throw DataError(a.manifest + ": interpret needs entries with label paths");

  const double snr = std::isnan(a.snr) ? ckpt.config.interp.snr_db : a.snr;
  const auto mixed = pipeline::mix_entries(chosen, pipeline::noise_pool(entries), pipeline::MixConfig{{snr}, false},
                                           pipeline::derive_seed(a.seed, 6),
                                           [&err](const std::string& m) { err << "warning: " << m << '\n'; });
  const auto folding = folding_from(a.folding);
  std::vector<std::vector<std::int32_t>> tokens, classes;
  std::vector<std::string> ids;
  for (const auto& m : mixed) {
    tokens.push_back(pipeline::token_sequence(m.noisy, ckpt));
    classes.push_back(labels::frame_labels(labels::read_phn(m.labels_path), tokens.back().size(), folding));
    ids.push_back(m.id);
  }
  const auto hists =
      interp::token_histograms(tokens, classes, ckpt.config.model.book_size, folding.class_names(), ids);
  const auto matrix = interp::js_matrix(hists);
  interp::emit_plots(hists, matrix, a.out);
  out << mixed.size() << " utterances, " << hists.size() << " phoneme classes, figures in " << a.out << '\n';
  return kExitOk;
}

// inspect-book -----------------------------------------------------------

int cmd_inspect(const std::string& path, std::ostream& out) {
  const auto ckpt = pipeline::load_checkpoint(path);
  if (!ckpt.book) throw DataError(path + ": the " + model::variant_name(ckpt.config.model.variant) +
                                  " checkpoint has no symbolic book");
  const auto& book = *ckpt.book;
  const auto r = vq::collapse_report(book);
  out << "variant     " << model::variant_name(ckpt.config.model.variant) << '\n'
      << "book size   " << book.size() << '\n'
      << "code dim    " << book.dim() << '\n'
      << "frames      " << r.frames << '\n'
      << "perplexity  " << std::fixed << std::setprecision(4) << r.perplexity << '\n'
      << "collapsed   " << r.collapsed.size() << " of " << book.size();
  if (!r.collapsed.empty()) {
    out << ":";
    for (auto j : r.collapsed) out << ' ' << j;
  }
  out << "\ntoken,usage\n";
  for (std::size_t j = 0; j < r.fractions.size(); ++j)
    out << j << ',' << std::setprecision(6) << r.fractions[j] << '\n';
  return kExitOk;
}

// synth-corpus -----------------------------------------------------------

struct SynthArgs {
  std::string out, phones;
  synth::CorpusConfig cfg;
};

int cmd_synth(SynthArgs a, std::ostream& out) {
  a.cfg.phones = split_list(a.phones);
  const auto manifest = synth::write_corpus(a.out, a.cfg);
  out << "wrote " << a.cfg.utterances << " utterances, manifest " << manifest.string() << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Speech enhancement with a symbolic token encoder.", "symse");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  MixArgs mix;
  auto* mix_cmd = app.add_subcommand("mix", "Mix clean utterances with noise at the given SNR levels");
  mix_cmd->add_option("--manifest", mix.manifest, "Corpus manifest (TSV)")->required();
  mix_cmd->add_option("--out", mix.out, "Output directory")->required();
  mix_cmd->add_option("--snr", mix.snr, "Comma-separated SNR levels in dB")->capture_default_str();
  mix_cmd->add_option("--seed", mix.seed, "Mixing seed")->capture_default_str();
  mix_cmd->add_option("--split", mix.split, "train, valid, test or all")
      ->check(CLI::IsMember({"train", "valid", "test", "all"}))
      ->capture_default_str();
  mix_cmd->add_flag("--exhaustive", mix.exhaustive, "Every utterance at every level");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write its checkpoint");
  train_cmd->add_option("--manifest", train.manifest, "Corpus manifest (TSV)")->required();
  train_cmd->add_option("--config", train.config, "Config file (key = value with [sections])");
  train_cmd->add_option("--out", train.out, "Checkpoint path; the log and config go next to it")->required();
  train_cmd->add_option("--set", train.set, "Override key=value (repeatable)");
  train_cmd->add_option("--folding", train.folding, "Phone folding table");
  train_cmd->add_flag("--quiet", train.quiet, "No per-epoch output");

  EnhanceArgs enh;
  auto* enh_cmd = app.add_subcommand("enhance", "Enhance a WAV file or every WAV in a directory");
  enh_cmd->add_option("--ckpt", enh.ckpt, "Checkpoint")->required();
  enh_cmd->add_option("--in", enh.in, "WAV file or directory")->required();
  enh_cmd->add_option("--out", enh.out, "Output directory")->required();
  enh_cmd->add_option("--labels", enh.labels, "Directory of <stem>.phn files (oracle variant)");
  enh_cmd->add_option("--folding", enh.folding, "Phone folding table");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score STOI and segmental SNR against clean references");
  eval_cmd->add_option("--clean", ev.clean, "Clean reference directory")->required();
  eval_cmd->add_option("--degraded", ev.degraded, "Enhanced directory")->required();
  eval_cmd->add_option("--noisy", ev.noisy, "Unprocessed noisy directory (default: --degraded)");
  eval_cmd->add_option("--mixed", ev.mixed, "mixed.tsv from mix, for the snr_db and noise columns");
  eval_cmd->add_option("--out", ev.out, "Scores CSV")->required();
  eval_cmd->add_option("--config", ev.config, "Config file for the stoi and ssnr settings");

  InterpArgs ip;
  auto* interp_cmd = app.add_subcommand("interpret", "Per-phoneme token histograms and the JS divergence matrix");
  interp_cmd->add_option("--ckpt", ip.ckpt, "Checkpoint of a quantizing variant")->required();
  interp_cmd->add_option("--manifest", ip.manifest, "Manifest with label paths")->required();
  interp_cmd->add_option("--out", ip.out, "Figure directory")->required();
  interp_cmd->add_option("--split", ip.split, "train, valid, test or all")
      ->check(CLI::IsMember({"train", "valid", "test", "all"}))
      ->capture_default_str();
  interp_cmd->add_option("--snr", ip.snr, "Mixing level in dB (default: the checkpoint's interp.snr_db)");
  interp_cmd->add_option("--seed", ip.seed, "Mixing seed")->capture_default_str();
  interp_cmd->add_option("--folding", ip.folding, "Phone folding table");

  std::string inspect_ckpt;
  auto* inspect_cmd = app.add_subcommand("inspect-book", "Book size, perplexity and collapsed tokens");
  inspect_cmd->add_option("--ckpt", inspect_ckpt, "Checkpoint")->required();

  SynthArgs syn;
  auto* synth_cmd = app.add_subcommand("synth-corpus", "Generate the synthetic labeled corpus and noise files");
  synth_cmd->add_option("--out", syn.out, "Output directory")->required();
  synth_cmd->add_option("--n", syn.cfg.utterances, "Number of utterances")->capture_default_str();
  synth_cmd->add_option("--seed", syn.cfg.seed, "Seed")->capture_default_str();
  synth_cmd->add_option("--min-seconds", syn.cfg.min_seconds, "Shortest utterance")->capture_default_str();
  synth_cmd->add_option("--max-seconds", syn.cfg.max_seconds, "Longest utterance")->capture_default_str();
  synth_cmd->add_option("--valid", syn.cfg.valid_fraction, "Validation fraction")->capture_default_str();
  synth_cmd->add_option("--test", syn.cfg.test_fraction, "Test fraction")->capture_default_str();
  synth_cmd->add_option("--phones", syn.phones, "Comma-separated phone subset");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    err << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kExitUsage;
  }

  try {
    if (mix_cmd->parsed()) return cmd_mix(mix, out, err);
    if (train_cmd->parsed()) return cmd_train(train, out, err);
    if (enh_cmd->parsed()) return cmd_enhance(enh, out);
    if (eval_cmd->parsed()) return cmd_eval(ev, out);
    if (interp_cmd->parsed()) return cmd_interpret(ip, out, err);
    if (inspect_cmd->parsed()) return cmd_inspect(inspect_ckpt, out);
    if (synth_cmd->parsed()) return cmd_synth(syn, out);
  } catch (const ContractError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace symse::cli
