#include "ctxnmt/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "ctxnmt/bleu.hpp"
#include "ctxnmt/bootstrap.hpp"
#include "ctxnmt/bpe.hpp"
#include "ctxnmt/checkpoint.hpp"
#include "ctxnmt/config.hpp"
#include "ctxnmt/corpus.hpp"
#include "ctxnmt/manifest.hpp"
#include "ctxnmt/slot.hpp"
#include "ctxnmt/synth.hpp"
#include "ctxnmt/trainer.hpp"

namespace fs = std::filesystem;

namespace ctxnmt {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::vector<Sentence> flatten(const std::vector<std::vector<Sentence>>& docs) {
  std::vector<Sentence> out;
  for (const auto& d : docs) out.insert(out.end(), d.begin(), d.end());
  return out;
}

std::vector<std::string> side_lines(const std::vector<Document>& docs, bool source) {
  std::vector<std::string> lines;
  for (const auto& d : docs)
    for (const auto& p : d.pairs) lines.push_back(join_tokens(source ? p.source : p.target));
  return lines;
}

std::vector<Document> apply_bpe(const std::vector<Document>& docs, const BpeModel& src, const BpeModel& trg) {
  std::vector<Document> out = docs;
  for (auto& d : out) {
    for (auto& p : d.pairs) {
      p.source = src.apply_tokens(join_tokens(p.source));
      p.target = trg.apply_tokens(join_tokens(p.target));
    }
  }
  return out;
}

// Everything a training or decoding command reads from a preprocessed dir.
struct PreparedData {
  Vocabulary source_vocab;
  Vocabulary target_vocab;
  BpeModel source_bpe;
  TrainData data;
  std::vector<fs::path> files;
};

PreparedData load_prepared(const fs::path& dir, bool with_corpus) {
  PreparedData p;
  p.files = {dir / "vocab.src", dir / "vocab.trg", dir / "bpe.src"};
  p.source_vocab = Vocabulary::load(dir / "vocab.src");
  p.target_vocab = Vocabulary::load(dir / "vocab.trg");
  p.source_bpe = BpeModel::load(dir / "bpe.src");
  if (!with_corpus) return p;
  const auto train = load_documents(dir / "train.src", dir / "train.trg");
  const auto dev = load_documents(dir / "dev.src", dir / "dev.trg");
  for (const char* f : {"train.src", "train.trg", "dev.src", "dev.trg"}) p.files.push_back(dir / f);
  for (const auto& d : train) p.data.train.push_back(encode_document(d, p.source_vocab, p.target_vocab));
  for (const auto& d : dev) {
    p.data.dev.push_back(encode_document(d, p.source_vocab, p.target_vocab));
    std::vector<Sentence> refs;
    for (const auto& pair : d.pairs) refs.push_back(desegment_tokens(pair.target));
    p.data.dev_references.push_back(std::move(refs));
  }
  return p;
}

// Common state of one invocation.
struct Context {
  Settings settings;
  fs::path out_dir = ".";
  std::string command;
  std::ostream* out = nullptr;

  RunManifest manifest() const {
    RunManifest m;
    m.command = command;
    m.config = settings.to_text();
    m.seed = settings.seed;
    m.timestamp = utc_timestamp();
    return m;
  }
};

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      seeds.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("--seeds expects comma-separated integers, got '" + text + "'");
    }
  }
  if (seeds.empty()) throw UsageError("--seeds is empty");
  return seeds;
}

void report_mean(std::ostream& out, const std::string& label, const std::vector<double>& values) {
  double mean = 0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0;
  for (double v : values) var += (v - mean) * (v - mean);
  const double sd = values.size() > 1 ? std::sqrt(var / static_cast<double>(values.size() - 1)) : 0.0;
  out << label << " " << fixed(mean, 2) << " +- " << fixed(sd, 2) << " over " << values.size() << " seeds\n";
}

std::string replace_seed(std::string pattern, std::uint64_t seed) {
  const std::string key = "{seed}";
  for (auto at = pattern.find(key); at != std::string::npos; at = pattern.find(key))
    pattern.replace(at, key.size(), std::to_string(seed));
  return pattern;
}

// ---- subcommands ----

void cmd_synth(const Context& ctx, const std::string& mode, int docs, int dev_docs, int test_docs, int entities,
               int min_sentences, int max_sentences) {
  SynthConfig base;
  base.mode = parse_synth_mode(mode);
  base.num_entities = entities;
  base.min_sentences = min_sentences;
  base.max_sentences = max_sentences;
  fs::create_directories(ctx.out_dir);
  RunManifest manifest = ctx.manifest();
  Rng seeds(ctx.settings.seed);
  const std::pair<const char*, int> splits[] = {{"train", docs}, {"dev", dev_docs}, {"test", test_docs}};
  for (const auto& [name, count] : splits) {
    SynthConfig cfg = base;
    cfg.num_documents = count;
    cfg.seed = seeds.next();
    cfg.validate();
    const SynthCorpus corpus = generate_synthetic(cfg);
    const fs::path stem = ctx.out_dir / name;
    save_documents(corpus.documents, stem.string() + ".src", stem.string() + ".trg");
    write_meta(corpus.meta, stem.string() + ".meta");
    for (const char* ext : {".src", ".trg", ".meta"}) manifest.outputs.push_back(stem.string() + ext);
    *ctx.out << name << ": " << count << " documents\n";
  }
  manifest.save(ctx.out_dir / "synth.manifest");
}

void cmd_preprocess(const Context& ctx, const fs::path& data_dir) {
  const auto& s = ctx.settings;
  fs::create_directories(ctx.out_dir);
  RunManifest manifest = ctx.manifest();
  std::map<std::string, std::vector<Document>> splits;
  for (const char* name : {"train", "dev", "test"}) {
    const fs::path src = data_dir / (std::string(name) + ".src");
    const fs::path trg = data_dir / (std::string(name) + ".trg");
    if (!fs::exists(src) && std::string(name) == "test") continue;
    splits[name] = load_documents(src, trg);
    manifest.add_input(src);
    manifest.add_input(trg);
  }
  const auto& raw_train = splits.at("train");
  const auto train = filter_documents(raw_train, s.max_len);
  if (train.empty()) throw std::runtime_error("no training document survives the length filter");
  const BpeModel src_bpe = BpeModel::learn(side_lines(train, true), s.merges);
  const BpeModel trg_bpe = BpeModel::learn(side_lines(train, false), s.merges);
  src_bpe.save(ctx.out_dir / "bpe.src");
  trg_bpe.save(ctx.out_dir / "bpe.trg");

  std::vector<Sentence> src_sentences, trg_sentences;
  for (auto& [name, docs] : splits) {
    const auto segmented = apply_bpe(name == "train" ? train : docs, src_bpe, trg_bpe);
    if (name == "train") {
      for (const auto& d : segmented)
        for (const auto& p : d.pairs) {
          src_sentences.push_back(p.source);
          trg_sentences.push_back(p.target);
        }
    }
    save_documents(segmented, ctx.out_dir / (name + ".src"), ctx.out_dir / (name + ".trg"));
    manifest.outputs.push_back((ctx.out_dir / (name + ".src")).string());
    manifest.outputs.push_back((ctx.out_dir / (name + ".trg")).string());
  }
  const Vocabulary src_vocab = Vocabulary::build(src_sentences);
  const Vocabulary trg_vocab = Vocabulary::build(trg_sentences);
  src_vocab.save(ctx.out_dir / "vocab.src");
  trg_vocab.save(ctx.out_dir / "vocab.trg");
  for (const char* f : {"bpe.src", "bpe.trg", "vocab.src", "vocab.trg"})
    manifest.outputs.push_back((ctx.out_dir / f).string());
  manifest.save(ctx.out_dir / "preprocess.manifest");
  *ctx.out << "train documents: " << train.size() << " kept of " << raw_train.size() << "\n";
  *ctx.out << "vocabulary: source " << src_vocab.size() << ", target " << trg_vocab.size() << "\n";
}

// Trains one model into `dir`; returns the best dev BLEU.
double train_one(const Context& ctx, const fs::path& data_dir, const fs::path& dir, std::optional<Variant> variant,
                 const fs::path& baseline_path) {
  fs::create_directories(dir);
  PreparedData prepared = load_prepared(data_dir, true);
  prepared.data.target_vocab = &prepared.target_vocab;
  RunManifest manifest = ctx.manifest();
  for (const auto& f : prepared.files) manifest.add_input(f);

  const TrainConfig tc = ctx.settings.train_config();
  const ModelConfig mc = ctx.settings.model_config(variant.value_or(Variant::Baseline), prepared.source_vocab.size(),
                                                   prepared.target_vocab.size());
  auto progress = [&ctx](const EpochRecord& e) {
    *ctx.out << "epoch " << e.epoch << " loss " << fixed(e.loss, 4) << " dev_bleu " << fixed(e.dev_bleu, 2) << "\n";
  };
  TrainResult result;
  std::string name;
  if (!variant) {
    name = "baseline";
    result = pretrain_baseline(mc, prepared.data, tc);
  } else {
    name = std::string(to_string(*variant));
    manifest.add_input(baseline_path);
    manifest.add_input(checkpoint_blob_path(baseline_path));
    const ModelParams<float> baseline = load_checkpoint(baseline_path);
    result = fine_tune_context(baseline, *variant, mc, prepared.data, tc);
  }
  for (const auto& e : result.log.epochs) progress(e);
  const fs::path ckpt = dir / (name + ".ckpt");
  save_checkpoint(result.best, ckpt);
  result.log.save(dir / (name + ".log"));
  manifest.outputs = {ckpt.string(), checkpoint_blob_path(ckpt).string(), (dir / (name + ".log")).string()};
  manifest.save(dir / (ctx.command + ".manifest"));
  const auto& best = result.log.epochs[result.log.best_epoch];
  *ctx.out << name << ": best epoch " << best.epoch << " dev_bleu " << fixed(best.dev_bleu, 2) << " -> "
           << ckpt.string() << "\n";
  return best.dev_bleu;
}

void cmd_train(Context ctx, const fs::path& data_dir, std::optional<Variant> variant, const std::string& baseline,
               const std::string& seeds_text) {
  if (seeds_text.empty()) {
    train_one(ctx, data_dir, ctx.out_dir, variant, replace_seed(baseline, ctx.settings.seed));
    return;
  }
  std::vector<double> scores;
  const fs::path root = ctx.out_dir;
  for (std::uint64_t seed : parse_seeds(seeds_text)) {
    ctx.settings.seed = seed;
    scores.push_back(train_one(ctx, data_dir, root / ("seed-" + std::to_string(seed)), variant,
                               replace_seed(baseline, seed)));
  }
  report_mean(*ctx.out, "dev_bleu", scores);
}

void cmd_translate(const Context& ctx, const fs::path& model_path, const fs::path& data_dir, const fs::path& input,
                   const fs::path& output) {
  const PreparedData prepared = load_prepared(data_dir, false);
  const ModelParams<float> params = load_checkpoint(model_path);
  if (params.config.source_vocab != prepared.source_vocab.size() ||
      params.config.target_vocab != prepared.target_vocab.size()) {
    throw std::runtime_error("checkpoint vocabulary sizes do not match " + data_dir.string());
  }
  const auto blocks = read_blocks(input);
  std::vector<EncodedDocument> docs;
  for (const auto& block : blocks) {
    EncodedDocument doc;
    for (const auto& sentence : block) {
      const auto pieces = prepared.source_bpe.apply_tokens(join_tokens(sentence));
      doc.push_back({prepared.source_vocab.encode(pieces), {}});
    }
    docs.push_back(std::move(doc));
  }
  TranslationStats stats;
  const auto hyps = translate_corpus(params, docs, prepared.target_vocab, ctx.settings.translate_options(), &stats);
  if (!output.parent_path().empty()) fs::create_directories(output.parent_path());
  write_blocks(hyps, output);

  RunManifest manifest = ctx.manifest();
  manifest.add_input(model_path);
  manifest.add_input(checkpoint_blob_path(model_path));
  for (const auto& f : prepared.files) manifest.add_input(f);
  manifest.add_input(input);
  manifest.outputs = {output.string()};
  manifest.save(output.string() + ".manifest");
  *ctx.out << "sentences=" << stats.sentences << " encoder_runs=" << stats.encoder_runs
           << " context_encoder_runs=" << stats.context_encoder_runs << " cache_hits=" << stats.cache_hits << "\n";
}

void cmd_evaluate(const Context& ctx, const fs::path& hyp_path, const fs::path& ref_path, const fs::path& meta_path,
                  const fs::path& report_path) {
  const auto hyps = read_blocks(hyp_path);
  const auto refs = read_blocks(ref_path);
  const EvalReport report = bleu(flatten(hyps), flatten(refs));
  std::string records = report.to_records();
  if (!meta_path.empty()) {
    const SlotScore slots = score_slots(hyps, read_meta(meta_path));
    records += "slot_correct=" + std::to_string(slots.correct) + "\n";
    records += "slot_total=" + std::to_string(slots.pronoun_slots) + "\n";
    records += "slot_accuracy=" + fixed(slots.accuracy(), 4) + "\n";
  }
  *ctx.out << report.to_text() << records;
  if (!report_path.empty()) {
    write_file(report_path, records);
    RunManifest manifest = ctx.manifest();
    manifest.add_input(hyp_path);
    manifest.add_input(ref_path);
    if (!meta_path.empty()) manifest.add_input(meta_path);
    manifest.outputs = {report_path.string()};
    manifest.save(report_path.string() + ".manifest");
  }
}

void cmd_compare(const Context& ctx, const fs::path& a, const fs::path& b, const fs::path& refs, int n) {
  const auto sa = flatten(read_blocks(a));
  const auto sb = flatten(read_blocks(b));
  const auto sr = flatten(read_blocks(refs));
  const SignificanceResult r = bootstrap_significance(sa, sb, sr, n, ctx.settings.seed);
  *ctx.out << "bleu_a=" << fixed(r.bleu_a, 2) << "\n"
           << "bleu_b=" << fixed(r.bleu_b, 2) << "\n"
           << "num_resamples=" << r.num_resamples << "\n"
           << "mean_delta=" << fixed(r.mean_delta, 4) << "\n"
           << "delta_95=" << fixed(r.delta_low, 4) << "," << fixed(r.delta_high, 4) << "\n"
           << "p_value=" << fixed(r.p_value, 4) << "\n";
}

void cmd_params(const Context& ctx, int source_vocab, int target_vocab) {
  *ctx.out << "variant\tparameters\n";
  for (Variant v : kAllVariants) {
    const ModelConfig mc = ctx.settings.model_config(v, source_vocab, target_vocab);
    mc.validate();
    *ctx.out << to_string(v) << "\t" << param_count(v, mc) << "\n";
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Context-aware neural machine translation experiments", "ctxnmt"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::optional<std::uint64_t> seed;
  std::string config_path, out_dir = ".", seeds_text;
  std::vector<std::string> overrides;
  std::optional<int> epochs, merges, beam, embed_dim, hidden_dim, batch_docs;
  app.add_option("--seed", seed, "Random seed")->expected(1);
  app.add_option("--config", config_path, "key=value settings file");
  app.add_option("--out-dir", out_dir, "Output directory");
  app.add_option("--set", overrides, "Override one setting, key=value (repeatable)");
  app.add_option("--epochs", epochs);
  app.add_option("--merges", merges);
  app.add_option("--beam", beam);
  app.add_option("--embed-dim", embed_dim);
  app.add_option("--hidden-dim", hidden_dim);
  app.add_option("--batch-docs", batch_docs, "Documents per mini-batch");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic pronoun-slot corpus");
  std::string mode = "trg-informative";
  int docs = 2000, dev_docs = 200, test_docs = 200, entities = 4, min_sent = 2, max_sent = 4;
  synth->add_option("--mode", mode)->check(CLI::IsMember({"trg-informative", "src-informative"}));
  synth->add_option("--docs", docs);
  synth->add_option("--dev-docs", dev_docs);
  synth->add_option("--test-docs", test_docs);
  synth->add_option("--entities", entities);
  synth->add_option("--min-sentences", min_sent);
  synth->add_option("--max-sentences", max_sent);

  auto* preprocess = app.add_subcommand("preprocess", "Filter, learn and apply BPE, build vocabularies");
  std::string data_dir;
  preprocess->add_option("--data-dir", data_dir, "Directory with {train,dev,test}.{src,trg}")->required();

  auto* train_baseline = app.add_subcommand("train-baseline", "Train the sentence-level baseline");
  train_baseline->add_option("--data", data_dir, "Preprocessed directory")->required();
  train_baseline->add_option("--seeds", seeds_text, "Comma-separated seeds; one run per seed");

  auto* finetune = app.add_subcommand("finetune", "Fine-tune a context variant from a baseline");
  std::string variant_name, baseline_path;
  finetune->add_option("--variant", variant_name)
      ->required()
      ->check(CLI::IsMember({"separated-source", "separated-target", "shared-source", "shared-target", "shared-mix"}));
  finetune->add_option("--baseline", baseline_path, "Baseline checkpoint; {seed} expands per seed")->required();
  finetune->add_option("--data", data_dir, "Preprocessed directory")->required();
  finetune->add_option("--seeds", seeds_text, "Comma-separated seeds; one run per seed");

  auto* translate = app.add_subcommand("translate", "Translate documents with a checkpoint");
  std::string model_path, input_path, output_path;
  translate->add_option("--model", model_path)->required();
  translate->add_option("--data", data_dir, "Preprocessed directory (vocabularies, BPE codes)")->required();
  translate->add_option("--input", input_path, "Source documents, word level")->required();
  translate->add_option("--output", output_path, "Hypotheses, one sentence per line")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Corpus BLEU and optional slot accuracy");
  std::string hyp_path, ref_path, meta_path, report_path;
  evaluate->add_option("--hyp", hyp_path)->required();
  evaluate->add_option("--ref", ref_path)->required();
  evaluate->add_option("--meta", meta_path, "Slot annotations of a synthetic test set");
  evaluate->add_option("--report", report_path, "Write key=value records here");

  auto* compare = app.add_subcommand("compare", "Paired bootstrap: is B better than A?");
  std::string a_path, b_path, refs_path;
  std::optional<int> samples;
  compare->add_option("a", a_path)->required();
  compare->add_option("b", b_path)->required();
  compare->add_option("refs", refs_path)->required();
  compare->add_option("--n", samples, "Resamples");

  auto* params = app.add_subcommand("params", "Parameter counts of all variants");
  int source_vocab = 1000, target_vocab = 1000;
  params->add_option("--source-vocab", source_vocab);
  params->add_option("--target-vocab", target_vocab);

  std::vector<std::string> rest(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(rest.begin(), rest.end());  // CLI11 consumes a reversed vector
  try {
    app.parse(rest);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return 2;
  }

  Context ctx;
  ctx.out = &out;
  ctx.out_dir = out_dir;
  try {
    if (!config_path.empty()) ctx.settings.apply(load_key_values(config_path));
    KeyValues kv;
    for (const auto& o : overrides) {
      const auto parsed = parse_key_values(o);
      for (const auto& [k, v] : parsed) kv.insert_or_assign(k, v);
    }
    ctx.settings.apply(kv);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  if (seed) ctx.settings.seed = *seed;
  if (epochs) ctx.settings.epochs = *epochs;
  if (merges) ctx.settings.merges = *merges;
  if (beam) ctx.settings.beam_size = *beam;
  if (embed_dim) ctx.settings.embed_dim = *embed_dim;
  if (hidden_dim) ctx.settings.hidden_dim = *hidden_dim;
  if (batch_docs) ctx.settings.max_docs_per_batch = *batch_docs;
  if (samples) ctx.settings.bootstrap_samples = *samples;

  try {
    if (synth->parsed()) {
      ctx.command = "synth";
      cmd_synth(ctx, mode, docs, dev_docs, test_docs, entities, min_sent, max_sent);
    } else if (preprocess->parsed()) {
      ctx.command = "preprocess";
      cmd_preprocess(ctx, data_dir);
    } else if (train_baseline->parsed()) {
      ctx.command = "train-baseline";
      cmd_train(ctx, data_dir, std::nullopt, "", seeds_text);
    } else if (finetune->parsed()) {
      ctx.command = "finetune";
      cmd_train(ctx, data_dir, parse_variant(variant_name), baseline_path, seeds_text);
    } else if (translate->parsed()) {
      ctx.command = "translate";
      cmd_translate(ctx, model_path, data_dir, input_path, output_path);
    } else if (evaluate->parsed()) {
      ctx.command = "evaluate";
      cmd_evaluate(ctx, hyp_path, ref_path, meta_path, report_path);
    } else if (compare->parsed()) {
      ctx.command = "compare";
      cmd_compare(ctx, a_path, b_path, refs_path, ctx.settings.bootstrap_samples);
    } else if (params->parsed()) {
      ctx.command = "params";
      cmd_params(ctx, source_vocab, target_vocab);
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace ctxnmt
