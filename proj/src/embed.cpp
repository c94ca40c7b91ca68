#include "cnorm/embed.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "cnorm/error.hpp"

namespace cnorm {

namespace {

constexpr double kClamp = 30.0;

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// -log sigmoid(x), stable for large |x|.
double neg_log_sigmoid(double x) { return x >= 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x)); }

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

// Cumulative count^0.75, normalized so the last entry is 1.
std::vector<double> noise_distribution(const std::vector<std::uint64_t>& counts) {
  std::vector<double> cdf;
  cdf.reserve(counts.size());
  double acc = 0.0;
  for (auto c : counts) {
    acc += std::pow(static_cast<double>(c), 0.75);
    cdf.push_back(acc);
  }
  for (auto& x : cdf) x /= acc;
  cdf.back() = 1.0;
  return cdf;
}

std::size_t draw_negative(std::mt19937_64& rng, const std::vector<double>& cdf) {
  const double u = uniform01(rng) * cdf.back();
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.end()) --it;
  return static_cast<std::size_t>(it - cdf.begin());
}

// Loss and gradients for one pair. grad_center must be zeroed by the caller;
// grad_context / grad_negs are overwritten.
double sgns_kernel(const double* center, const double* context, std::span<const double* const> negs,
                   std::size_t dim, double* grad_center, double* grad_context, std::span<double* const> grad_negs) {
  const double s = std::clamp(dot(center, context, dim), -kClamp, kClamp);
  double loss = neg_log_sigmoid(s);
  const double g = sigmoid(s) - 1.0;
  for (std::size_t i = 0; i < dim; ++i) {
    grad_center[i] += g * context[i];
    grad_context[i] = g * center[i];
  }
  for (std::size_t k = 0; k < negs.size(); ++k) {
    const double t = std::clamp(dot(center, negs[k], dim), -kClamp, kClamp);
    loss += neg_log_sigmoid(-t);
    const double gn = sigmoid(t);
    for (std::size_t i = 0; i < dim; ++i) {
      grad_center[i] += gn * negs[k][i];
      grad_negs[k][i] = gn * center[i];
    }
  }
  return loss;
}

struct Pair {
  std::uint32_t center;
  std::uint32_t context;
  std::uint32_t repeats;
};

// Holds the shared parameter tables. `Shared` selects relaxed atomic access so
// that parallel workers can update rows without locks.
template <bool Shared>
class SgnsUpdater {
 public:
  SgnsUpdater(EmbeddingModel& m)
      : model_(m),
        dim_(static_cast<std::size_t>(m.config.dim)),
        negs_(static_cast<std::size_t>(m.config.negatives)),
        center_(dim_),
        context_(dim_),
        neg_rows_(negs_ * dim_),
        g_center_(dim_),
        g_context_(dim_),
        g_negs_(negs_ * dim_) {}

  double apply(const Pair& p, std::mt19937_64& rng, double lr) {
    neg_ids_.clear();
    for (std::size_t k = 0; k < negs_; ++k) {
      auto n = draw_negative(rng, model_.vocab.noise_cdf);
      if (n == p.context) continue;
      neg_ids_.push_back(n);
    }
    double* in = model_.input_vectors.data();
    double* out = model_.output_vectors.data();

    load(in + p.center * dim_, center_.data());
    load(out + p.context * dim_, context_.data());
    neg_ptrs_.clear();
    grad_ptrs_.clear();
    for (std::size_t k = 0; k < neg_ids_.size(); ++k) {
      load(out + neg_ids_[k] * dim_, neg_rows_.data() + k * dim_);
      neg_ptrs_.push_back(neg_rows_.data() + k * dim_);
      grad_ptrs_.push_back(g_negs_.data() + k * dim_);
    }
    std::fill(g_center_.begin(), g_center_.end(), 0.0);
    const double loss = sgns_kernel(center_.data(), context_.data(), neg_ptrs_, dim_, g_center_.data(),
                                    g_context_.data(), grad_ptrs_);

    step(in + p.center * dim_, g_center_.data(), lr);
    step(out + p.context * dim_, g_context_.data(), lr);
    for (std::size_t k = 0; k < neg_ids_.size(); ++k) step(out + neg_ids_[k] * dim_, grad_ptrs_[k], lr);
    return loss;
  }

 private:
  void load(double* src, double* dst) const {
    if constexpr (Shared) {
      for (std::size_t i = 0; i < dim_; ++i) dst[i] = std::atomic_ref<double>(src[i]).load(std::memory_order_relaxed);
    } else {
      std::copy_n(src, dim_, dst);
    }
  }

  void step(double* row, const double* grad, double lr) const {
    for (std::size_t i = 0; i < dim_; ++i) {
      if constexpr (Shared) {
        std::atomic_ref<double>(row[i]).fetch_add(-lr * grad[i], std::memory_order_relaxed);
      } else {
        row[i] -= lr * grad[i];
      }
    }
  }

  EmbeddingModel& model_;
  std::size_t dim_, negs_;
  std::vector<double> center_, context_, neg_rows_, g_center_, g_context_, g_negs_;
  std::vector<std::size_t> neg_ids_;
  std::vector<const double*> neg_ptrs_;
  std::vector<double*> grad_ptrs_;
};

std::vector<std::vector<std::uint32_t>> encode(std::span<const TokenStream> streams, const Vocabulary& vocab) {
  std::vector<std::vector<std::uint32_t>> out;
  out.reserve(streams.size());
  for (const auto& s : streams) {
    std::vector<std::uint32_t> ids;
    for (const auto& t : s.tokens)
      if (auto i = vocab.find(t)) ids.push_back(static_cast<std::uint32_t>(*i));
    out.push_back(std::move(ids));
  }
  return out;
}

std::vector<std::uint32_t> repeat_factors(const Vocabulary& vocab, const KeywordSet& keywords, double alpha) {
  std::vector<std::uint32_t> reps(vocab.size(), 1);
  const double w_max = keywords.max_weight();
  if (w_max <= 0.0) return reps;
  for (const auto& e : keywords.entries) {
    if (auto i = vocab.find(e.term))
      reps[*i] = static_cast<std::uint32_t>(std::ceil(1.0 + alpha * (e.weight / w_max)));
  }
  return reps;
}

// Expands one epoch of a sentence range into (center, context, repeats) pairs.
// Window radii come from `rng` so the full schedule can be drawn up front.
void expand_pairs(const std::vector<std::uint32_t>& sentence, int window, const std::vector<std::uint32_t>& reps,
                  std::mt19937_64& rng, std::vector<Pair>& out) {
  const auto n = static_cast<std::ptrdiff_t>(sentence.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto radius = static_cast<std::ptrdiff_t>(1 + uniform_index(rng, static_cast<std::size_t>(window)));
    for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(0, i - radius); j <= std::min(n - 1, i + radius); ++j) {
      if (j == i) continue;
      const auto c = sentence[static_cast<std::size_t>(i)], o = sentence[static_cast<std::size_t>(j)];
      out.push_back({c, o, std::max(reps[c], reps[o])});
    }
  }
}

}  // namespace

void EmbedConfig::validate() const {
  if (dim < 1) throw Error("invalid_config", "dim must be >= 1");
  if (window < 1) throw Error("invalid_config", "window must be >= 1");
  if (negatives < 0) throw Error("invalid_config", "negatives must be >= 0");
  if (epochs < 1) throw Error("invalid_config", "epochs must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw Error("invalid_config", "learning_rate must be positive");
  if (min_learning_rate < 0.0 || min_learning_rate > learning_rate)
    throw Error("invalid_config", "min_learning_rate must lie in [0, learning_rate]");
  if (min_count < 1) throw Error("invalid_config", "min_count must be >= 1");
  if (keyword_boost < 0.0 || !std::isfinite(keyword_boost))
    throw Error("invalid_config", "keyword_boost must be non-negative");
  if (threads < 0) throw Error("invalid_config", "threads must be >= 0");
}

std::optional<std::size_t> Vocabulary::find(std::string_view token) const {
  auto it = index.find(std::string(token));
  if (it == index.end()) return std::nullopt;
  return it->second;
}

Vocabulary build_vocab(std::span<const TokenStream> streams, int min_count) {
  if (streams.empty()) throw Error("empty_input", "no token streams");
  std::vector<std::string> order;
  std::unordered_map<std::string, std::uint64_t> counts;
  for (const auto& s : streams)
    for (const auto& t : s.tokens)
      if (counts[t]++ == 0) order.push_back(t);

  Vocabulary v;
  for (const auto& t : order) {
    const auto c = counts[t];
    if (c < static_cast<std::uint64_t>(std::max(min_count, 1))) continue;
    v.index.emplace(t, v.tokens.size());
    v.tokens.push_back(t);
    v.counts.push_back(c);
  }
  if (v.tokens.empty()) throw Error("empty_vocabulary", "no token reaches min_count " + std::to_string(min_count));

  v.noise_cdf = noise_distribution(v.counts);
  return v;
}

SgnsGradients sgns_step(std::span<const double> center, std::span<const double> context,
                        std::span<const std::span<const double>> negatives) {
  const std::size_t dim = center.size();
  if (context.size() != dim) throw Error("dimension_mismatch", "context vector");
  for (const auto& n : negatives)
    if (n.size() != dim) throw Error("dimension_mismatch", "negative vector");

  SgnsGradients g;
  g.center.assign(dim, 0.0);
  g.context.assign(dim, 0.0);
  g.negatives.assign(negatives.size(), std::vector<double>(dim, 0.0));
  std::vector<const double*> neg_ptrs;
  std::vector<double*> grad_ptrs;
  for (std::size_t k = 0; k < negatives.size(); ++k) {
    neg_ptrs.push_back(negatives[k].data());
    grad_ptrs.push_back(g.negatives[k].data());
  }
  g.loss = sgns_kernel(center.data(), context.data(), neg_ptrs, dim, g.center.data(), g.context.data(), grad_ptrs);
  return g;
}

std::span<const double> EmbeddingModel::input_row(std::size_t i) const {
  const auto d = static_cast<std::size_t>(config.dim);
  return {input_vectors.data() + i * d, d};
}

std::span<const double> EmbeddingModel::output_row(std::size_t i) const {
  const auto d = static_cast<std::size_t>(config.dim);
  return {output_vectors.data() + i * d, d};
}

std::optional<std::span<const double>> EmbeddingModel::vector(std::string_view token) const {
  if (auto i = vocab.find(token)) return input_row(*i);
  return std::nullopt;
}

EmbeddingModel train(std::span<const TokenStream> streams, const KeywordSet& keywords, const EmbedConfig& config) {
  config.validate();
  EmbeddingModel model;
  model.config = config;
  model.vocab = build_vocab(streams, config.min_count);

  const auto dim = static_cast<std::size_t>(config.dim);
  const auto V = model.vocab.size();
  model.input_vectors.resize(V * dim);
  model.output_vectors.assign(V * dim, 0.0);
  {
    std::mt19937_64 init_rng(config.seed);
    for (auto& x : model.input_vectors) x = (uniform01(init_rng) - 0.5) / static_cast<double>(dim);
  }

  const auto sentences = encode(streams, model.vocab);
  const auto reps = repeat_factors(model.vocab, keywords, config.keyword_boost);

  // Draw the whole window schedule first so the learning-rate decay can be
  // spread over the exact number of updates.
  std::mt19937_64 window_rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<std::vector<std::vector<Pair>>> schedule(static_cast<std::size_t>(config.epochs));
  std::uint64_t total_updates = 0;
  for (auto& epoch : schedule) {
    epoch.resize(sentences.size());
    for (std::size_t s = 0; s < sentences.size(); ++s) {
      expand_pairs(sentences[s], config.window, reps, window_rng, epoch[s]);
      for (const auto& p : epoch[s]) total_updates += p.repeats;
    }
  }
  model.epoch_loss.assign(schedule.size(), 0.0);
  if (total_updates == 0) return model;

  const double lr0 = config.learning_rate, lr_min = config.min_learning_rate;
  auto lr_at = [&](std::uint64_t done) {
    return lr0 - (lr0 - lr_min) * static_cast<double>(done) / static_cast<double>(total_updates);
  };

  if (config.deterministic) {
    SgnsUpdater<false> upd(model);
    std::mt19937_64 rng(config.seed + 1);
    std::uint64_t done = 0;
    for (std::size_t e = 0; e < schedule.size(); ++e) {
      double loss = 0.0;
      std::uint64_t n = 0;
      for (const auto& sentence_pairs : schedule[e])
        for (const auto& p : sentence_pairs)
          for (std::uint32_t r = 0; r < p.repeats; ++r, ++done, ++n) loss += upd.apply(p, rng, lr_at(done));
      model.epoch_loss[e] = n ? loss / static_cast<double>(n) : 0.0;
    }
    return model;
  }

  const std::size_t workers = std::max<std::size_t>(
      1, std::min<std::size_t>(sentences.size(), config.threads > 0 ? static_cast<std::size_t>(config.threads)
                                                                    : std::thread::hardware_concurrency()));
  std::atomic<std::uint64_t> done{0};
  for (std::size_t e = 0; e < schedule.size(); ++e) {
    std::vector<double> loss(workers, 0.0);
    std::vector<std::uint64_t> count(workers, 0);
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          SgnsUpdater<true> upd(model);
          std::mt19937_64 rng(config.seed + 1 + e * workers + w);
          for (std::size_t s = w; s < schedule[e].size(); s += workers)
            for (const auto& p : schedule[e][s])
              for (std::uint32_t r = 0; r < p.repeats; ++r) {
                const auto t = done.fetch_add(1, std::memory_order_relaxed);
                loss[w] += upd.apply(p, rng, lr_at(t));
                ++count[w];
              }
        });
      }
    }
    double total = 0.0;
    std::uint64_t n = 0;
    for (std::size_t w = 0; w < workers; ++w) {
      total += loss[w];
      n += count[w];
    }
    model.epoch_loss[e] = n ? total / static_cast<double>(n) : 0.0;
  }
  return model;
}

SentenceVector sentence_vector(const TokenStream& stream, const EmbeddingModel& model, const KeywordSet& keywords,
                               double alpha) {
  const auto dim = static_cast<std::size_t>(model.config.dim);
  const double w_max = keywords.max_weight();
  SentenceVector out{stream.item_id, std::vector<double>(dim, 0.0)};
  double total_weight = 0.0;
  for (const auto& tok : stream.tokens) {
    auto row = model.vector(tok);
    if (!row) continue;
    double w = 1.0;
    if (w_max > 0.0)
      if (auto kw = keywords.weight(tok)) w = 1.0 + alpha * (*kw / w_max);
    for (std::size_t i = 0; i < dim; ++i) out.vector[i] += w * (*row)[i];
    total_weight += w;
  }
  if (total_weight == 0.0) throw Error("unembeddable_sentence", "item '" + stream.item_id + "'");
  for (auto& x : out.vector) x /= total_weight;
  return out;
}

// Text format, one record per line:
//   cnorm-embedding 1
//   dim <d>
//   vocab_size <n>
//   config key=value ...
//   input
//   <token> <count> <d values>      (n lines)
//   output
//   <token> <count> <d values>      (n lines)
void save_model(const EmbeddingModel& model, std::ostream& out) {
  const auto& c = model.config;
  out << "cnorm-embedding 1\n";
  out << "dim " << c.dim << '\n';
  out << "vocab_size " << model.vocab.size() << '\n';
  out << fmt::format(
      "config window={} negatives={} epochs={} learning_rate={} min_learning_rate={} min_count={} seed={} "
      "keyword_boost={} deterministic={}\n",
      c.window, c.negatives, c.epochs, c.learning_rate, c.min_learning_rate, c.min_count, c.seed, c.keyword_boost,
      c.deterministic ? 1 : 0);
  auto rows = [&](const char* name, const std::vector<double>& table) {
    out << name << '\n';
    const auto d = static_cast<std::size_t>(c.dim);
    for (std::size_t i = 0; i < model.vocab.size(); ++i) {
      out << model.vocab.tokens[i] << ' ' << model.vocab.counts[i];
      for (std::size_t k = 0; k < d; ++k) out << ' ' << fmt::format("{}", table[i * d + k]);
      out << '\n';
    }
  };
  rows("input", model.input_vectors);
  rows("output", model.output_vectors);
}

void save_model(const EmbeddingModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io_error", "cannot write " + path);
  save_model(model, out);
}

EmbeddingModel load_model(std::istream& in) {
  auto fail = [](const std::string& what) { return Error("parse_error", "model: " + what); };
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "cnorm-embedding" || version != 1) throw fail("bad header");
  EmbeddingModel m;
  std::size_t n = 0;
  if (!(in >> tag >> m.config.dim) || tag != "dim") throw fail("missing dim");
  if (!(in >> tag >> n) || tag != "vocab_size") throw fail("missing vocab_size");
  if (!(in >> tag) || tag != "config") throw fail("missing config");
  std::string line;
  std::getline(in, line);
  std::istringstream kv(line);
  std::string item;
  while (kv >> item) {
    auto eq = item.find('=');
    if (eq == std::string::npos) throw fail("bad config entry " + item);
    const auto key = item.substr(0, eq), val = item.substr(eq + 1);
    auto& c = m.config;
    if (key == "window") c.window = std::stoi(val);
    else if (key == "negatives") c.negatives = std::stoi(val);
    else if (key == "epochs") c.epochs = std::stoi(val);
    else if (key == "learning_rate") c.learning_rate = std::stod(val);
    else if (key == "min_learning_rate") c.min_learning_rate = std::stod(val);
    else if (key == "min_count") c.min_count = std::stoi(val);
    else if (key == "seed") c.seed = std::stoull(val);
    else if (key == "keyword_boost") c.keyword_boost = std::stod(val);
    else if (key == "deterministic") c.deterministic = val == "1";
  }
  const auto d = static_cast<std::size_t>(m.config.dim);
  auto read_rows = [&](const char* name, std::vector<double>& table, bool define_vocab) {
    if (!(in >> tag) || tag != name) throw fail(std::string("missing section ") + name);
    table.resize(n * d);
    for (std::size_t i = 0; i < n; ++i) {
      std::string tok;
      std::uint64_t count = 0;
      if (!(in >> tok >> count)) throw fail("truncated rows");
      if (define_vocab) {
        m.vocab.index.emplace(tok, m.vocab.tokens.size());
        m.vocab.tokens.push_back(tok);
        m.vocab.counts.push_back(count);
      } else if (m.vocab.tokens[i] != tok) {
        throw fail("output rows out of order");
      }
      for (std::size_t k = 0; k < d; ++k)
        if (!(in >> table[i * d + k])) throw fail("truncated vector");
    }
  };
  read_rows("input", m.input_vectors, true);
  read_rows("output", m.output_vectors, false);
  m.vocab.noise_cdf = noise_distribution(m.vocab.counts);
  return m;
}

EmbeddingModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io_error", "cannot open " + path);
  return load_model(in);
}

}  // namespace cnorm
