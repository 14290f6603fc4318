#include "textshift/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <type_traits>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "textshift/analysis.hpp"
#include "textshift/checkpoint.hpp"
#include "textshift/cnn_model.hpp"
#include "textshift/corpus.hpp"
#include "textshift/embeddings.hpp"
#include "textshift/error.hpp"
#include "textshift/fasttext.hpp"
#include "textshift/ingest.hpp"
#include "textshift/io.hpp"
#include "textshift/training.hpp"
#include "textshift/tsne.hpp"

namespace textshift {

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& why) { throw Error(ErrorCode::InvalidConfig, why); }

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig:
      return kExitConfig;
    case ErrorCode::HttpError:
    case ErrorCode::Timeout:
    case ErrorCode::MalformedResponse:
    case ErrorCode::IoError:
    case ErrorCode::StaleCache:
    case ErrorCode::EmptyFeatureMap:
    case ErrorCode::EmptySentence:
    case ErrorCode::WindowTooLarge:
      return kExitRuntime;
    default:
      return kExitData;
  }
}

std::string dashed(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

// One subcommand: its CLI11 app, the config keys it accepts and the values
// given on the command line.
struct Command {
  CLI::App* app = nullptr;
  std::set<std::string> keys;
  json overlay = json::object();
  std::string config_path;

  template <class T>
  void option(const std::string& key, const std::string& help) {
    keys.insert(key);
    app->add_option_function<T>(
        "--" + dashed(key), [this, key](const T& value) { overlay[key] = value; }, help);
  }

  void flag(const std::string& key, const std::string& help) {
    keys.insert(key);
    app->add_flag_function(
        "--" + dashed(key), [this, key](std::int64_t count) { overlay[key] = count > 0; }, help);
  }
};

// Config-file values overridden by flags, with typed access.
class Settings {
 public:
  Settings(const Command& command) {
    values_ = json::object();
    if (!command.config_path.empty()) {
      std::ifstream in(command.config_path);
      if (!in) config_error("cannot read config file " + command.config_path);
      try {
        values_ = json::parse(in);
      } catch (const json::exception& e) {
        config_error("config file " + command.config_path + " is not valid JSON: " + e.what());
      }
      if (!values_.is_object()) config_error("config file must hold a JSON object");
      for (const auto& [key, _] : values_.items()) {
        if (!command.keys.contains(key)) config_error("unknown config key '" + key + "'");
      }
    }
    values_.update(command.overlay);
  }

  const json& values() const { return values_; }
  bool has(const std::string& key) const { return values_.contains(key) && !values_.at(key).is_null(); }

  template <class T>
  T get(const std::string& key, T fallback) const {
    if (!has(key)) return fallback;
    return convert<T>(key, values_.at(key));
  }

  template <class T>
  T require(const std::string& key) const {
    if (!has(key)) config_error("missing required setting --" + dashed(key));
    return convert<T>(key, values_.at(key));
  }

  std::filesystem::path input_file(const std::string& key) const {
    const std::filesystem::path path = require<std::string>(key);
    if (!std::filesystem::is_regular_file(path)) {
      config_error("--" + dashed(key) + ": no such file " + path.string());
    }
    return path;
  }

  std::optional<std::filesystem::path> output_file(const std::string& key, bool required) const {
    if (!has(key)) {
      if (required) config_error("missing required setting --" + dashed(key));
      return std::nullopt;
    }
    const std::filesystem::path path = require<std::string>(key);
    if (path.empty()) config_error("--" + dashed(key) + " is empty");
    const auto parent = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    if (!std::filesystem::is_directory(parent)) {
      config_error("--" + dashed(key) + ": directory " + parent.string() + " does not exist");
    }
    return path;
  }

 private:
  template <class T>
  static void check_scalar(const std::string& key, const json& v) {
    auto bad = [&](const char* what) { config_error("setting '" + key + "' must be " + what); };
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) bad("a boolean");
    } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
      if (!v.is_number_unsigned()) bad("a non-negative integer");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) bad("an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) bad("a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) bad("a string");
    }
  }

  template <class T>
  static T convert(const std::string& key, const json& v) {
    if constexpr (std::is_same_v<T, std::vector<std::size_t>>) {
      if (!v.is_array()) config_error("setting '" + key + "' must be a list");
      for (const auto& item : v) check_scalar<std::size_t>(key, item);
    } else {
      check_scalar<T>(key, v);
    }
    return v.get<T>();
  }

  json values_;
};

// Line-JSON log, written atomically once the command succeeds.
class RunLog {
 public:
  RunLog(const Settings& settings, const std::string& command)
      : path_(settings.output_file("log", false)) {
    lines_.push_back({{"event", "start"}, {"command", command}, {"settings", settings.values()}});
  }

  void add(json line) { lines_.push_back(std::move(line)); }

  void finish() const {
    if (!path_) return;
    write_file_atomic(*path_, [&](std::ostream& out) {
      for (const auto& line : lines_) out << line.dump() << '\n';
    });
  }

 private:
  std::optional<std::filesystem::path> path_;
  std::vector<json> lines_;
};

CorpusFormat corpus_format(const std::filesystem::path& path) {
  const auto format = format_from_path(path);
  if (!format) config_error("unsupported corpus extension for " + path.string() + " (use .jsonl or .tsv)");
  return *format;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  if (corpus_format(path) == CorpusFormat::Jsonl) {
    write_corpus_jsonl(corpus, path);
  } else {
    write_corpus_tsv(corpus, path);
  }
}

std::size_t thread_count(const Settings& s) {
  const auto threads = s.get<std::size_t>("threads", 1);
  if (threads == 0) config_error("--threads must be >= 1");
  return threads;
}

std::size_t max_len_setting(const Settings& s, const CheckpointExtras* extras) {
  std::size_t fallback = kDefaultMaxLen;
  if (extras && extras->info.contains("max_len") && extras->info.at("max_len").is_number_unsigned()) {
    fallback = extras->info.at("max_len").get<std::size_t>();
  }
  const auto max_len = s.get<std::size_t>("max_len", fallback);
  if (max_len == 0) config_error("--max-len must be >= 1");
  return max_len;
}

void add_common(Command& c, bool threads) {
  c.app->add_option("--config", c.config_path, "JSON config file; flags override its values");
  c.option<std::string>("log", "line-JSON log path");
  if (threads) c.option<std::size_t>("threads", "worker cap (1 = serial)");
}

// --- train -----------------------------------------------------------------

void define_train(Command& c) {
  add_common(c, true);
  c.option<std::string>("model", "model kind: cnn | fasttext");
  c.option<std::string>("train", "training corpus (.jsonl or .tsv)");
  c.option<std::string>("val", "validation corpus");
  c.option<std::string>("labels", "label set file, one name per line");
  c.option<std::string>("out", "checkpoint path");
  c.option<std::uint64_t>("seed", "random seed (default 1)");
  c.flag("deterministic", "serial, reproducible training (default on)");
  c.option<std::size_t>("batch_size", "minibatch size (cnn)");
  c.option<std::size_t>("max_epochs", "epoch limit (default 25 cnn, 5 fasttext)");
  c.option<std::size_t>("patience", "early-stopping patience (cnn)");
  c.option<std::string>("optimizer", "adadelta | sgd (cnn)");
  c.option<double>("rho", "Adadelta decay");
  c.option<double>("epsilon", "Adadelta epsilon");
  c.option<double>("learning_rate", "SGD step size");
  c.option<std::size_t>("min_count", "vocabulary count threshold");
  c.option<std::size_t>("max_len", "tokens kept per document");
  c.option<std::size_t>("embed_dim", "embedding width (cnn)");
  c.option<std::vector<std::size_t>>("filter_widths", "convolution window widths (cnn)");
  c.option<std::size_t>("filters_per_width", "filters per window width (cnn)");
  c.option<double>("dropout", "drop probability on pooled features (cnn)");
  c.option<double>("norm_cap", "max L2 norm of dense rows (cnn)");
  c.option<std::string>("pretrained", "word2vec binary vectors (cnn)");
  c.option<bool>("trainable_embeddings", "update embeddings during training (cnn)");
  c.option<std::size_t>("ft_dim", "hidden width (fasttext)");
  c.option<std::size_t>("max_ngram", "longest hashed n-gram (fasttext)");
  c.option<std::size_t>("buckets", "n-gram hash buckets (fasttext)");
  c.option<double>("lr0", "initial step size (fasttext)");
}

json epoch_json(const EpochRecord& r) {
  return {{"event", "epoch"},
          {"epoch", r.epoch},
          {"train_loss", r.train_loss},
          {"train_accuracy", r.train_accuracy},
          {"val_accuracy", r.val_accuracy}};
}

int run_train(const Command& c, std::ostream& out, std::ostream& err) {
  const Settings s(c);
  const auto kind = s.get<std::string>("model", "cnn");
  if (kind != "cnn" && kind != "fasttext") config_error("--model must be cnn or fasttext");
  const bool is_cnn = kind == "cnn";

  const auto labels_path = s.input_file("labels");
  const auto train_path = s.input_file("train");
  const auto val_path = s.input_file("val");
  const auto out_path = *s.output_file("out", true);
  const auto train_format = corpus_format(train_path);
  const auto val_format = corpus_format(val_path);
  const auto seed = s.get<std::uint64_t>("seed", 1);
  const auto max_len = max_len_setting(s, nullptr);
  const auto min_count = s.get<std::size_t>("min_count", 1);
  if (min_count == 0) config_error("--min-count must be >= 1");

  TrainConfig train_config;
  train_config.seed = seed;
  train_config.deterministic = s.get<bool>("deterministic", true);
  train_config.threads = thread_count(s);
  train_config.batch_size = s.get<std::size_t>("batch_size", train_config.batch_size);
  train_config.max_epochs = s.get<std::size_t>("max_epochs", is_cnn ? train_config.max_epochs : 5);
  train_config.patience = s.get<std::size_t>("patience", train_config.patience);
  try {
    train_config.optimizer.kind = parse_optimizer(s.get<std::string>("optimizer", "adadelta"));
  } catch (const Error& e) {
    config_error(e.what());
  }
  train_config.optimizer.rho = s.get<double>("rho", train_config.optimizer.rho);
  train_config.optimizer.epsilon = s.get<double>("epsilon", train_config.optimizer.epsilon);
  train_config.optimizer.learning_rate =
      s.get<double>("learning_rate", train_config.optimizer.learning_rate);
  train_config.validate();

  CnnConfig cnn_config;
  cnn_config.embed_dim = s.get<std::size_t>("embed_dim", cnn_config.embed_dim);
  cnn_config.filter_widths = s.get<std::vector<std::size_t>>("filter_widths", cnn_config.filter_widths);
  cnn_config.filters_per_width = s.get<std::size_t>("filters_per_width", cnn_config.filters_per_width);
  cnn_config.dropout = s.get<double>("dropout", cnn_config.dropout);
  cnn_config.norm_cap = s.get<double>("norm_cap", cnn_config.norm_cap);
  const bool trainable = s.get<bool>("trainable_embeddings", true);
  std::optional<std::filesystem::path> pretrained_path;
  if (s.has("pretrained")) pretrained_path = s.input_file("pretrained");
  if (is_cnn) cnn_config.validate();

  FastTextConfig ft_config;
  ft_config.dim = s.get<std::size_t>("ft_dim", ft_config.dim);
  ft_config.max_ngram = s.get<std::size_t>("max_ngram", ft_config.max_ngram);
  ft_config.buckets = s.get<std::size_t>("buckets", ft_config.buckets);
  FtTrainOptions ft_options;
  ft_options.epochs = train_config.max_epochs;
  ft_options.lr0 = s.get<double>("lr0", ft_options.lr0);
  ft_options.seed = seed;
  if (!is_cnn) {
    ft_config.validate();
    if (!(ft_options.lr0 > 0.0)) config_error("--lr0 must be positive");
  }

  RunLog log(s, "train");

  const auto labels = load_label_set(labels_path);
  LoadStats train_stats;
  LoadStats val_stats;
  const auto train = load_corpus(train_path, train_format, labels, max_len, &train_stats);
  const auto val = load_corpus(val_path, val_format, labels, max_len, &val_stats);
  if (train.empty()) throw Error(ErrorCode::InsufficientData, "training corpus is empty");
  if (val.empty()) throw Error(ErrorCode::InsufficientData, "validation corpus is empty");
  log.add({{"event", "data"},
           {"train_documents", train.size()},
           {"train_dropped_empty", train_stats.dropped_empty},
           {"val_documents", val.size()},
           {"val_dropped_empty", val_stats.dropped_empty}});

  const auto vocab = build_vocab(train, min_count);
  auto on_epoch = [&](const EpochRecord& r) {
    const auto line = epoch_json(r);
    err << line.dump() << '\n';
    log.add(line);
  };

  CheckpointExtras extras;
  extras.info = {{"seed", seed},
                 {"max_len", max_len},
                 {"min_count", min_count},
                 {"max_epochs", train_config.max_epochs}};
  TrainHistory history;
  if (is_cnn) {
    std::optional<WordVectors> pretrained;
    if (pretrained_path) {
      pretrained = read_word2vec_binary(*pretrained_path);
      if (!s.has("embed_dim")) cnn_config.embed_dim = pretrained->dim;
    }
    auto embeddings =
        init_embeddings(vocab, pretrained ? &*pretrained : nullptr, cnn_config.embed_dim, seed);
    embeddings.trainable = trainable;
    const CnnModel initial(labels, vocab, cnn_config, std::move(embeddings), seed);
    auto result = train_cnn(initial, train, val, train_config, on_epoch);
    history = result.history;
    extras.optimizer = result.optimizer;
    extras.info["batch_size"] = train_config.batch_size;
    extras.info["patience"] = train_config.patience;
    extras.info["optimizer"] = std::string(to_string(train_config.optimizer.kind));
    extras.info["selected_epoch"] = history.epochs.at(history.selected).epoch;
    save_model(result.model, out_path, extras);
  } else {
    const FastTextModel initial(labels, vocab, ft_config, seed);
    auto result = train_fasttext(initial, train, val, ft_options, on_epoch);
    history = result.history;
    extras.info["lr0"] = ft_options.lr0;
    extras.info["selected_epoch"] = history.epochs.at(history.selected).epoch;
    save_model(result.model, out_path, extras);
  }

  const auto& best = history.epochs.at(history.selected);
  log.add({{"event", "done"},
           {"seed", seed},
           {"selected_epoch", best.epoch},
           {"train_accuracy", best.train_accuracy},
           {"val_accuracy", best.val_accuracy},
           {"checkpoint", out_path.string()}});
  log.finish();
  out << "seed " << seed << " selected epoch " << best.epoch << " val_accuracy "
      << format_double(best.val_accuracy) << '\n';
  return kExitOk;
}

// --- evaluate --------------------------------------------------------------

void define_evaluate(Command& c) {
  add_common(c, true);
  c.option<std::string>("model", "checkpoint path");
  c.option<std::string>("data", "labeled corpus to score");
  c.option<std::string>("confusion", "confusion matrix CSV (default confusion.csv)");
  c.option<std::string>("recall", "per-class recall CSV (default recall.csv)");
  c.option<std::size_t>("max_len", "tokens kept per document (default: as trained)");
}

int run_evaluate(const Command& c, std::ostream& out, std::ostream&) {
  const Settings s(c);
  const auto model_path = s.input_file("model");
  const auto data_path = s.input_file("data");
  const auto data_format = corpus_format(data_path);
  const auto confusion_path = s.output_file("confusion", false).value_or("confusion.csv");
  const auto recall_path = s.output_file("recall", false).value_or("recall.csv");
  const auto threads = thread_count(s);
  RunLog log(s, "evaluate");

  CheckpointExtras extras;
  const auto model = load_model(model_path, &extras);
  const auto max_len = max_len_setting(s, &extras);
  const auto& labels = model_labels(model);
  const auto corpus = load_corpus(data_path, data_format, labels, max_len);
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "no documents in " + data_path.string());
  const auto result = evaluate(model, corpus, threads);

  write_file_atomic(confusion_path, [&](std::ostream& f) {
    f << "label";
    for (const auto& name : labels.names()) f << ',' << csv_field(name);
    f << '\n';
    for (std::size_t t = 0; t < labels.size(); ++t) {
      f << csv_field(labels.name(t));
      for (std::size_t p = 0; p < labels.size(); ++p) f << ',' << result.confusion.at(t, p);
      f << '\n';
    }
  });
  write_file_atomic(recall_path, [&](std::ostream& f) {
    f << "label,support,correct,recall\n";
    for (std::size_t t = 0; t < labels.size(); ++t) {
      f << csv_field(labels.name(t)) << ',' << result.confusion.row_total(t) << ','
        << result.confusion.at(t, t) << ',' << format_double(result.recall[t]) << '\n';
    }
  });
  log.add({{"event", "done"}, {"documents", corpus.size()}, {"accuracy", result.accuracy}});
  log.finish();
  out << "accuracy " << format_double(result.accuracy) << " documents " << corpus.size() << '\n';
  return kExitOk;
}

// --- classify --------------------------------------------------------------

void define_classify(Command& c) {
  add_common(c, false);
  c.option<std::string>("model", "checkpoint path");
  c.option<std::string>("input", "text file, one document per line (default: standard input)");
  c.option<std::string>("out", "output path (default: standard output)");
  c.option<std::size_t>("topk", "labels printed per line (default 1)");
  c.option<std::size_t>("max_len", "tokens kept per document (default: as trained)");
}

int run_classify(const Command& c, std::istream& in, std::ostream& out, std::ostream& err) {
  const Settings s(c);
  const auto model_path = s.input_file("model");
  const auto out_path = s.output_file("out", false);
  const auto topk = s.get<std::size_t>("topk", 1);
  if (topk == 0) config_error("--topk must be >= 1");
  std::optional<std::filesystem::path> input_path;
  if (s.has("input")) input_path = s.require<std::string>("input");
  RunLog log(s, "classify");

  CheckpointExtras extras;
  const auto model = load_model(model_path, &extras);
  const auto max_len = max_len_setting(s, &extras);
  const auto& labels = model_labels(model);
  if (topk > labels.size()) {
    config_error("--topk " + std::to_string(topk) + " exceeds the " + std::to_string(labels.size()) +
                 " labels");
  }

  std::ifstream file;
  if (input_path) {
    file.open(*input_path);
    if (!file) throw Error(ErrorCode::MalformedRecord, "cannot read input " + input_path->string());
  }
  std::istream& source = input_path ? static_cast<std::istream&>(file) : in;

  std::ostringstream buffer;
  std::size_t classified = 0;
  std::size_t skipped = 0;
  std::string line;
  std::vector<std::size_t> order(labels.size());
  while (std::getline(source, line)) {
    const auto tokens = tokenize(line, max_len);
    if (tokens.empty()) {
      ++skipped;
      continue;
    }
    const auto probs = predict_proba(model, tokens);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
    for (std::size_t r = 0; r < topk; ++r) {
      if (r > 0) buffer << '\t';
      buffer << labels.name(order[r]) << '\t' << format_double(probs[order[r]]);
    }
    buffer << '\n';
    ++classified;
  }
  if (source.bad()) throw Error(ErrorCode::MalformedRecord, "error while reading input");
  if (skipped > 0) err << "warning: skipped " << skipped << " empty line(s)\n";

  if (out_path) {
    write_file_atomic(*out_path, [&](std::ostream& f) { f << buffer.str(); });
  } else {
    out << buffer.str();
  }
  log.add({{"event", "done"}, {"classified", classified}, {"skipped_empty", skipped}});
  log.finish();
  return kExitOk;
}

// --- compare ---------------------------------------------------------------

void define_compare(Command& c) {
  add_common(c, false);
  c.option<std::string>("a", "first corpus");
  c.option<std::string>("b", "second corpus");
  c.option<std::string>("labels", "label set file (default: the 27 job categories)");
  c.option<std::size_t>("min_count", "raw count needed in both corpora (default 5)");
  c.option<std::size_t>("top", "rows per ratio table (default 15)");
  c.option<std::size_t>("max_len", "tokens kept per document");
  c.option<std::string>("out", "report CSV (default: standard output)");
}

int run_compare(const Command& c, std::ostream& out, std::ostream&) {
  const Settings s(c);
  const auto a_path = s.input_file("a");
  const auto b_path = s.input_file("b");
  const auto a_format = corpus_format(a_path);
  const auto b_format = corpus_format(b_path);
  std::optional<std::filesystem::path> labels_path;
  if (s.has("labels")) labels_path = s.input_file("labels");
  const auto min_count = s.get<std::size_t>("min_count", 5);
  const auto top = s.get<std::size_t>("top", 15);
  if (min_count == 0) config_error("--min-count must be >= 1");
  if (top == 0) config_error("--top must be >= 1");
  const auto max_len = max_len_setting(s, nullptr);
  const auto out_path = s.output_file("out", false);
  RunLog log(s, "compare");

  const auto labels = labels_path ? load_label_set(*labels_path) : job_categories();
  const auto a = load_corpus(a_path, a_format, labels, max_len);
  const auto b = load_corpus(b_path, b_format, labels, max_len);
  const auto comparison = compare_domains(a, b, min_count, top);
  if (out_path) {
    write_comparison_report(comparison, *out_path);
  } else {
    write_comparison_report(comparison, out);
  }
  log.add({{"event", "done"}, {"rho", comparison.rho}, {"shared_tokens", comparison.shared.size()}});
  log.finish();
  return kExitOk;
}

// --- project ---------------------------------------------------------------

void define_project(Command& c) {
  add_common(c, true);
  c.option<std::string>("model", "CNN checkpoint path");
  c.option<std::string>("in", "corpus to project");
  c.option<std::string>("out", "projection CSV");
  c.option<std::uint64_t>("seed", "random seed (default 1)");
  c.option<double>("perplexity", "t-SNE perplexity (default 30)");
  c.option<std::size_t>("iterations", "t-SNE iterations (default 1000)");
  c.option<std::size_t>("max_len", "tokens kept per document (default: as trained)");
}

int run_project(const Command& c, std::ostream& out, std::ostream&) {
  const Settings s(c);
  const auto model_path = s.input_file("model");
  const auto in_path = s.input_file("in");
  const auto in_format = corpus_format(in_path);
  const auto out_path = *s.output_file("out", true);
  const auto threads = thread_count(s);
  TsneConfig tsne_config;
  tsne_config.seed = s.get<std::uint64_t>("seed", 1);
  tsne_config.perplexity = s.get<double>("perplexity", tsne_config.perplexity);
  tsne_config.iterations = s.get<std::size_t>("iterations", tsne_config.iterations);
  if (!(tsne_config.perplexity > 0.0)) config_error("--perplexity must be positive");
  if (tsne_config.iterations == 0) config_error("--iterations must be >= 1");
  RunLog log(s, "project");

  CheckpointExtras extras;
  const auto model = load_cnn(model_path, &extras);
  const auto max_len = max_len_setting(s, &extras);
  const auto corpus = load_corpus(in_path, in_format, model.labels, max_len);
  const auto features = extract_feature_matrix(model, corpus, threads);
  const auto result = tsne(features, tsne_config);
  export_projection(result.embedding, corpus, out_path);

  log.add({{"event", "done"},
           {"seed", tsne_config.seed},
           {"points", corpus.size()},
           {"kl_initial", result.kl.front()},
           {"kl_final", result.kl.back()}});
  log.finish();
  out << "projected " << corpus.size() << " documents, KL " << format_double(result.kl.back(), 6)
      << '\n';
  return kExitOk;
}

// --- synth -----------------------------------------------------------------

void define_synth(Command& c) {
  add_common(c, false);
  c.option<std::uint64_t>("seed", "random seed (default 1)");
  c.option<std::string>("out_src", "source-domain corpus (.jsonl or .tsv)");
  c.option<std::string>("out_tgt", "target-domain corpus (.jsonl or .tsv)");
  c.option<std::string>("out_labels", "label set file to write");
  c.option<std::size_t>("num_classes", "classes (default 6)");
  c.option<std::size_t>("class_keyword_count", "keywords per class (default 20)");
  c.option<std::size_t>("shared_vocab_size", "keyword vocabulary size (default 500)");
  c.option<std::size_t>("domain_noise_vocab_size", "noise vocabulary per domain (default 400)");
  c.option<std::size_t>("doc_length_min", "shortest document (default 10)");
  c.option<std::size_t>("doc_length_max", "longest document (default 30)");
  c.option<double>("keyword_rate", "probability a token is a class keyword (default 0.3)");
  c.option<std::size_t>("docs_per_class_source", "source documents per class (default 300)");
  c.option<std::size_t>("docs_per_class_target", "target documents per class (default 60)");
}

int run_synth(const Command& c, std::ostream& out, std::ostream&) {
  const Settings s(c);
  SynthConfig config;
  config.seed = s.get<std::uint64_t>("seed", config.seed);
  config.num_classes = s.get<std::size_t>("num_classes", config.num_classes);
  config.class_keyword_count = s.get<std::size_t>("class_keyword_count", config.class_keyword_count);
  config.shared_vocab_size = s.get<std::size_t>("shared_vocab_size", config.shared_vocab_size);
  config.domain_noise_vocab_size =
      s.get<std::size_t>("domain_noise_vocab_size", config.domain_noise_vocab_size);
  config.doc_length_min = s.get<std::size_t>("doc_length_min", config.doc_length_min);
  config.doc_length_max = s.get<std::size_t>("doc_length_max", config.doc_length_max);
  config.keyword_rate = s.get<double>("keyword_rate", config.keyword_rate);
  config.docs_per_class_source = s.get<std::size_t>("docs_per_class_source", config.docs_per_class_source);
  config.docs_per_class_target = s.get<std::size_t>("docs_per_class_target", config.docs_per_class_target);
  config.validate();
  const auto src_path = *s.output_file("out_src", true);
  const auto tgt_path = *s.output_file("out_tgt", true);
  corpus_format(src_path);
  corpus_format(tgt_path);
  const auto labels_path = s.output_file("out_labels", false);
  RunLog log(s, "synth");

  const auto corpora = synth_generate(config);
  write_corpus(corpora.source, src_path);
  write_corpus(corpora.target, tgt_path);
  if (labels_path) write_label_set(corpora.source.label_set, *labels_path);
  log.add({{"event", "done"},
           {"seed", config.seed},
           {"source_documents", corpora.source.size()},
           {"target_documents", corpora.target.size()}});
  log.finish();
  out << "seed " << config.seed << " wrote " << corpora.source.size() << " source and "
      << corpora.target.size() << " target documents\n";
  return kExitOk;
}

// --- ingest ----------------------------------------------------------------

const std::vector<std::string> kIngestKeys{
    "base_url",        "api_key",    "api_key_param", "query_field_name",
    "offset_param",    "limit_param", "per_request_limit", "max_records_per_label",
    "min_interval_ms", "timeout_ms", "results_path",  "text_path",
    "max_pages",       "max_consecutive_failures"};

void define_ingest(Command& c) {
  add_common(c, true);
  c.option<std::string>("labels", "label set file; each name is a query keyword");
  c.option<std::string>("out", "output corpus (.jsonl)");
  c.option<std::string>("base_url", "API endpoint, scheme://host[:port]/path");
  c.option<std::string>("api_key", "static key sent as a query parameter");
  c.option<std::size_t>("per_request_limit", "records per page");
  c.option<std::size_t>("max_records_per_label", "cap per label");
  c.option<std::int64_t>("min_interval_ms", "minimum spacing between requests");
  c.option<std::int64_t>("timeout_ms", "per-request timeout");
  for (const auto& key : kIngestKeys) c.keys.insert(key);
}

int run_ingest(const Command& c, std::ostream& out, std::ostream& err) {
  const Settings s(c);
  json ingest_json = json::object();
  for (const auto& key : kIngestKeys) {
    if (s.values().contains(key)) ingest_json[key] = s.values().at(key);
  }
  const auto config = IngestConfig::from_json(ingest_json);
  const auto labels_path = s.input_file("labels");
  const auto out_path = *s.output_file("out", true);
  const auto threads = thread_count(s);
  RunLog log(s, "ingest");

  const auto labels = load_label_set(labels_path);
  const auto reports = fetch_labels(config, labels, threads,
                                    [] { return std::make_unique<HttplibTransport>(); });
  std::vector<RawRecord> records;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& report = reports[i];
    for (const auto& e : report.errors) err << "warning: " << labels.name(i) << ": " << e << '\n';
    records.insert(records.end(), report.records.begin(), report.records.end());
    log.add({{"event", "label"},
             {"label", labels.name(i)},
             {"records", report.records.size()},
             {"pages_requested", report.pages_requested},
             {"pages_failed", report.pages_failed},
             {"errors", report.errors}});
  }
  write_raw_jsonl(records, out_path);
  log.add({{"event", "done"}, {"records", records.size()}});
  log.finish();
  out << "wrote " << records.size() << " records\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
            std::ostream& err) {
  CLI::App app("Cross-domain short-text classification toolkit", "textshift");
  app.require_subcommand(1);
  app.fallthrough(false);

  std::map<std::string, Command> commands;
  auto add = [&](const std::string& name, const std::string& help, void (*define)(Command&)) {
    auto& command = commands[name];
    command.app = app.add_subcommand(name, help);
    define(command);
  };
  add("train", "train a cnn or fasttext model and write a checkpoint", define_train);
  add("evaluate", "score a checkpoint on a labeled corpus", define_evaluate);
  add("classify", "predict labels for lines of text", define_classify);
  add("compare", "compare word frequencies of two corpora", define_compare);
  add("project", "2-D t-SNE projection of CNN features", define_project);
  add("synth", "generate a synthetic source/target corpus pair", define_synth);
  add("ingest", "fetch labeled snippets from an HTTP JSON API", define_ingest);

  std::vector<std::string> storage;
  storage.reserve(args.size() + 1);
  storage.push_back("textshift");
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : storage) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    for (const auto& [name, command] : commands) {
      if (!command.app->parsed()) continue;
      if (name == "train") return run_train(command, out, err);
      if (name == "evaluate") return run_evaluate(command, out, err);
      if (name == "classify") return run_classify(command, in, out, err);
      if (name == "compare") return run_compare(command, out, err);
      if (name == "project") return run_project(command, out, err);
      if (name == "synth") return run_synth(command, out, err);
      if (name == "ingest") return run_ingest(command, out, err);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cin, std::cout, std::cerr);
}

}  // namespace textshift
