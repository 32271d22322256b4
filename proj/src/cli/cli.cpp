#include "avatr/cli/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "avatr/audio/synth.hpp"
#include "avatr/audio/wav.hpp"
#include "avatr/config_value.hpp"
#include "avatr/error.hpp"
#include "avatr/model/checkpoint.hpp"
#include "avatr/train/trainer.hpp"

namespace avatr::cli {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::pair<std::string, std::string> split_assignment(std::string_view text, std::string_view where) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos)
    throw ConfigError(std::string(where) + ": expected key=value, got '" + std::string(text) + "'");
  const auto key = trim(text.substr(0, eq));
  if (key.empty()) throw ConfigError(std::string(where) + ": empty key");
  return {std::string(key), std::string(trim(text.substr(eq + 1)))};
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

// Histogram CSV lives next to the report: report.csv -> report_hist.csv.
fs::path histogram_path(const fs::path& report) {
  fs::path p = report;
  p.replace_filename(report.stem().string() + "_hist" + report.extension().string());
  return p;
}

void write_report(const train::EvalReport& report, const fs::path& path) {
  {
    auto out = open_output(path);
    out << "episode,input_sisdr,output_sisdr\n";
    for (std::size_t i = 0; i < report.output_sisdr.size(); ++i)
      out << i << ',' << config::format_double(report.input_sisdr[i]) << ','
          << config::format_double(report.output_sisdr[i]) << '\n';
  }
  auto out = open_output(histogram_path(path));
  out << "bin_low,bin_high,input_count,output_count\n";
  const auto& h = report.histogram;
  for (std::size_t b = 0; b < h.output_counts.size(); ++b)
    out << config::format_double(h.low + b) << ',' << config::format_double(h.low + b + 1) << ','
        << h.input_counts[b] << ',' << h.output_counts[b] << '\n';
}

std::string summary_line(const train::EvalReport& r) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(3) << "episodes=" << r.output_sisdr.size() << " input_sisdr=" << r.input_mean
    << " output_sisdr=" << r.mean << " stderr=" << r.standard_error << " improvement=" << r.improvement();
  return s.str();
}

int cmd_synth(const fs::path& dir, const audio::SynthOptions& options, std::uint64_t seed, bool force,
              std::ostream& out) {
  if (fs::exists(dir) && !fs::is_directory(dir)) throw DataError(dir.string() + " exists and is not a directory");
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!force) throw DataError(dir.string() + " is not empty (use --force to overwrite)");
    fs::remove_all(dir / "speech");
    fs::remove_all(dir / "noise");
  }
  const auto manifest = audio::synth_corpus_generate(dir, options, seed);
  out << "wrote " << manifest.clips.size() << " speech clips and " << manifest.noise.size() << " noise clips to "
      << dir.string() << '\n';
  return ok;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  out << "# resolved config\n" << cfg.to_text();
  if (cfg.data.manifest.empty()) throw ConfigError("data.manifest is required");
  const audio::Corpus corpus(audio::Manifest::load(cfg.data.manifest), cfg.data.regime, cfg.model.sample_rate);
  for (const auto& w : corpus.warnings()) out << "warning: " << w << '\n';

  auto log = open_output(cfg.out.log);
  log << "epoch,train_loss,val_loss,lr\n" << std::flush;
  auto result = train::run_training(corpus, cfg.model, cfg.train, cfg.data.mixture,
                                    [&](const train::EpochLog& e, model::AvatrModel<float>&) {
                                      log << e.epoch << ',' << config::format_double(e.train_loss) << ','
                                          << config::format_double(e.val_loss) << ','
                                          << config::format_double(e.lr) << '\n'
                                          << std::flush;
                                      out << "epoch " << e.epoch << " train_loss "
                                          << config::format_double(e.train_loss) << " val_loss "
                                          << config::format_double(e.val_loss) << " lr "
                                          << config::format_double(e.lr) << '\n';
                                      return true;
                                    });
  model::save_checkpoint_file(result.best_model, cfg.out.checkpoint);
  out << "best epoch " << result.best_epoch << " val_loss " << config::format_double(result.best_val_loss)
      << "; checkpoint " << cfg.out.checkpoint << '\n';
  return ok;
}

struct EvalArgs {
  std::string ckpt, manifest, out;
  std::string regime = "closed", mixture = "s+s", split = "test";
  std::size_t episodes = 100;
  std::uint64_t seed = 0;
  double reference_seconds = 2.0;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  auto model = model::load_checkpoint_file(a.ckpt);
  const audio::Corpus corpus(audio::Manifest::load(a.manifest), audio::parse_regime(a.regime),
                             model.config().sample_rate);
  const auto report = train::evaluate(corpus, model, audio::parse_split(a.split), audio::parse_mixture(a.mixture),
                                      a.episodes, a.seed, a.reference_seconds);
  write_report(report, a.out);
  out << summary_line(report) << '\n';
  return ok;
}

int cmd_extract(const fs::path& ckpt, const fs::path& mix, const fs::path& ref, const fs::path& dest,
                std::ostream& out) {
  auto model = model::load_checkpoint_file(ckpt);
  const int rate = model.config().sample_rate;
  const auto mixture = audio::read_wav(mix, rate);
  const auto reference = audio::read_wav(ref, rate);
  const auto estimate = model.extract(mixture.samples, reference.samples);
  audio::write_wav(dest, audio::Waveform{estimate, rate});
  out << "wrote " << estimate.size() << " samples to " << dest.string() << '\n';
  return ok;
}

int cmd_export_avatars(const fs::path& ckpt, const fs::path& manifest_path, const fs::path& dest,
                       std::ostream& out) {
  auto model = model::load_checkpoint_file(ckpt);
  const auto manifest = audio::Manifest::load(manifest_path);
  auto csv = open_output(dest);
  csv << "speaker_id";
  for (std::size_t j = 0; j < model.config().hidden; ++j) csv << ",a" << j;
  csv << '\n';
  for (const auto& clip : manifest.clips) {
    const auto path = clip.path.is_absolute() ? clip.path : manifest.base / clip.path;
    const auto wave = audio::read_wav(path, model.config().sample_rate);
    csv << clip.speaker;
    for (float v : model.avatar(wave.samples)) csv << ',' << config::format_double(v);
    csv << '\n';
  }
  out << "wrote " << manifest.clips.size() << " avatars to " << dest.string() << '\n';
  return ok;
}

}  // namespace

void RunConfig::set(std::string_view key, std::string_view value) {
  const auto dot = key.find('.');
  const std::string_view section = key.substr(0, dot), field = dot == key.npos ? "" : key.substr(dot + 1);
  if (dot == key.npos || field.empty()) throw ConfigError("config key '" + std::string(key) + "' needs a section");
  if (section == "model") model.set(field, value);
  else if (section == "train") train.set(field, value);
  else if (section == "data") data.set(field, value);
  else if (section == "out") {
    if (value.empty()) throw ConfigError("out." + std::string(field) + " must not be empty");
    if (field == "checkpoint") out.checkpoint = std::string(value);
    else if (field == "log") out.log = std::string(value);
    else throw ConfigError("unknown out key '" + std::string(field) + "'");
  } else {
    throw ConfigError("unknown config section '" + std::string(section) + "'");
  }
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
}

std::vector<std::pair<std::string, std::string>> RunConfig::to_pairs() const {
  std::vector<std::pair<std::string, std::string>> all;
  const auto add = [&](std::string_view prefix, const auto& pairs) {
    for (const auto& [k, v] : pairs) all.emplace_back(std::string(prefix) + k, v);
  };
  add("model.", model.to_pairs());
  add("train.", train.to_pairs());
  add("data.", data.to_pairs());
  add("out.", std::vector<std::pair<std::string, std::string>>{{"checkpoint", out.checkpoint}, {"log", out.log}});
  return all;
}

std::string RunConfig::to_text() const {
  std::string s;
  for (const auto& [k, v] : to_pairs()) s += k + "=" + v + "\n";
  return s;
}

std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::set<std::string> seen;
  std::size_t line_no = 0, pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto kv = split_assignment(line, "config line " + std::to_string(line_no));
    if (!seen.insert(kv.first).second) throw ConfigError("config key '" + kv.first + "' given twice");
    out.push_back(std::move(kv));
  }
  return out;
}

RunConfig resolve_config(const fs::path* file, const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (file) {
    const std::string text = read_text(*file);
    for (const auto& [k, v] : parse_config_text(text)) cfg.set(k, v);
  }
  for (const auto& o : overrides) {
    const auto [k, v] = split_assignment(o, "--set");
    cfg.set(k, v);
  }
  cfg.validate();
  return cfg;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reference-conditioned speech extraction: synth, train, eval, extract, export-avatars", "avatr"};
  app.require_subcommand(1);

  std::string synth_dir;
  audio::SynthOptions synth;
  std::uint64_t synth_seed = 0;
  bool force = false;
  auto* s = app.add_subcommand("synth", "Write a synthetic corpus and manifest");
  s->add_option("--out", synth_dir, "Output directory")->required();
  s->add_option("--speakers", synth.speakers, "Number of speakers")->capture_default_str();
  s->add_option("--clips", synth.clips, "Clips per speaker")->capture_default_str();
  s->add_option("--open-speakers", synth.open_speakers, "Speakers held out as an open test set")
      ->capture_default_str();
  s->add_option("--noise-clips", synth.noise_clips, "Clips per noise kind")->capture_default_str();
  s->add_option("--clip-seconds", synth.clip_seconds, "Speech clip duration")->capture_default_str();
  s->add_option("--noise-seconds", synth.noise_seconds, "Noise clip duration")->capture_default_str();
  s->add_option("--rate", synth.sample_rate, "Sample rate")->capture_default_str();
  s->add_option("--seed", synth_seed, "Corpus seed")->capture_default_str();
  s->add_flag("--force", force, "Overwrite a non-empty directory");

  std::string config_file;
  std::vector<std::string> overrides;
  auto* t = app.add_subcommand("train", "Train a model from a key=value config");
  t->add_option("--config", config_file, "Config file");
  t->add_option("--set", overrides, "Override, e.g. model.hidden=256")->expected(1, -1);

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score a checkpoint on 0 dB episodes");
  e->add_option("--ckpt", ev.ckpt, "Checkpoint")->required();
  e->add_option("--manifest", ev.manifest, "Corpus manifest")->required();
  e->add_option("--regime", ev.regime, "open|closed")->capture_default_str();
  e->add_option("--mixture", ev.mixture, "s+s|s+n|s+a")->capture_default_str();
  e->add_option("--split", ev.split, "train|val|test")->capture_default_str();
  e->add_option("--episodes", ev.episodes, "Episode count")->capture_default_str();
  e->add_option("--seed", ev.seed, "Episode seed")->capture_default_str();
  e->add_option("--reference-seconds", ev.reference_seconds, "Reference crop; 0 keeps whole clips")
      ->capture_default_str();
  e->add_option("--out", ev.out, "Per-episode CSV; the histogram goes to <stem>_hist.csv")->required();

  std::string x_ckpt, x_mix, x_ref, x_out;
  auto* x = app.add_subcommand("extract", "Extract the reference speaker from one mixture");
  x->add_option("--ckpt", x_ckpt, "Checkpoint")->required();
  x->add_option("--mix", x_mix, "Mixture WAV")->required();
  x->add_option("--ref", x_ref, "Reference WAV")->required();
  x->add_option("--out", x_out, "Output WAV")->required();

  std::string a_ckpt, a_manifest, a_out;
  auto* a = app.add_subcommand("export-avatars", "Write one avatar row per manifest clip");
  a->add_option("--ckpt", a_ckpt, "Checkpoint")->required();
  a->add_option("--manifest", a_manifest, "Corpus manifest")->required();
  a->add_option("--out", a_out, "Output CSV")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& pe) {
    const int code = app.exit(pe, out, err);
    return code == 0 ? ok : usage;
  }

  try {
    if (*s) return cmd_synth(synth_dir, synth, synth_seed, force, out);
    if (*t) {
      const fs::path file(config_file);
      return cmd_train(resolve_config(config_file.empty() ? nullptr : &file, overrides), out);
    }
    if (*e) return cmd_eval(ev, out);
    if (*x) return cmd_extract(x_ckpt, x_mix, x_ref, x_out, out);
    if (*a) return cmd_export_avatars(a_ckpt, a_manifest, a_out, out);
  } catch (const ConfigError& ex) {
    err << "error: " << ex.what() << '\n';
    return usage;
  } catch (const NumericalError& ex) {
    err << "numerical failure: " << ex.what() << '\n';
    return numerical;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return data;
  }
  return usage;
}

}  // namespace avatr::cli
