#include "fqgan/config.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include "fqgan/io.hpp"

namespace fqgan {

namespace {

struct Field {
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, std::string_view)> set;
};

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* expected) {
  throw ConfigError("config key '" + std::string(key) + "': cannot parse '" + std::string(value) +
                    "' as " + expected);
}

std::uint64_t to_u64(std::string_view key, std::string_view text) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
    bad_value(key, text, "a non-negative integer");
  return v;
}

long long to_i64(std::string_view key, std::string_view text) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
    bad_value(key, text, "an integer");
  return v;
}

double to_f64(std::string_view key, std::string_view text) {
  double v = 0.0;
  if (!parse_double(text, v)) bad_value(key, text, "a real number");
  return v;
}

bool to_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  bad_value(key, text, "true/false");
}

std::vector<std::size_t> to_list(std::string_view key, std::string_view text) {
  std::vector<std::size_t> out;
  if (text.empty() || text == "none") return out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = text.find(',', pos);
    const std::string item = trim(text.substr(pos, comma == std::string_view::npos ? text.npos : comma - pos));
    out.push_back(static_cast<std::size_t>(to_u64(key, item)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::string from_list(const std::vector<std::size_t>& v) {
  if (v.empty()) return "none";
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

#define FQ_SIZE(name)                                                                   \
  {#name, {[](const TrainConfig& c) { return std::to_string(c.name); },                 \
           [](TrainConfig& c, std::string_view v) { c.name = static_cast<std::size_t>(to_u64(#name, v)); }}}
#define FQ_REAL(name)                                                          \
  {#name, {[](const TrainConfig& c) { return format_double(c.name); },         \
           [](TrainConfig& c, std::string_view v) { c.name = to_f64(#name, v); }}}
#define FQ_BOOL(name)                                                              \
  {#name, {[](const TrainConfig& c) { return std::string(c.name ? "true" : "false"); }, \
           [](TrainConfig& c, std::string_view v) { c.name = to_bool(#name, v); }}}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"dataset", {[](const TrainConfig& c) { return c.dataset; },
                   [](TrainConfig& c, std::string_view v) { c.dataset = std::string(v); }}},
      FQ_SIZE(modes),
      FQ_REAL(radius),
      FQ_REAL(data_std),
      {"data_csv", {[](const TrainConfig& c) { return c.data_csv; },
                    [](TrainConfig& c, std::string_view v) { c.data_csv = std::string(v); }}},
      FQ_SIZE(latent_dim),
      FQ_SIZE(data_dim),
      FQ_SIZE(hidden_width),
      FQ_SIZE(hidden_layers),
      FQ_REAL(leaky_slope),
      FQ_SIZE(batch_size),
      FQ_REAL(g_lr),
      FQ_REAL(d_lr),
      FQ_REAL(adam_beta1),
      FQ_REAL(adam_beta2),
      FQ_REAL(adam_eps),
      FQ_SIZE(d_steps),
      FQ_SIZE(g_steps),
      {"g_loss", {[](const TrainConfig& c) { return to_string(c.g_loss); },
                  [](TrainConfig& c, std::string_view v) {
                    try {
                      c.g_loss = parse_generator_loss(std::string(v));
                    } catch (const std::invalid_argument&) {
                      bad_value("g_loss", v, "non-saturating|minimax");
                    }
                  }}},
      {"fq_layers", {[](const TrainConfig& c) { return from_list(c.fq_layers); },
                     [](TrainConfig& c, std::string_view v) { c.fq_layers = to_list("fq_layers", v); }}},
      FQ_SIZE(fq_positions),
      FQ_SIZE(codebook_bits),
      FQ_REAL(lambda),
      FQ_REAL(beta),
      FQ_REAL(alpha),
      {"warmup_iters", {[](const TrainConfig& c) { return std::to_string(c.warmup_iters); },
                        [](TrainConfig& c, std::string_view v) { c.warmup_iters = to_i64("warmup_iters", v); }}},
      FQ_BOOL(bypass_during_warmup),
      FQ_BOOL(use_ema),
      FQ_BOOL(commit_to_generator),
      {"codebook_init", {[](const TrainConfig& c) { return vq::to_string(c.codebook_init); },
                         [](TrainConfig& c, std::string_view v) {
                           try {
                             c.codebook_init = vq::parse_init_scheme(std::string(v));
                           } catch (const std::invalid_argument&) {
                             bad_value("codebook_init", v, "unit-gaussian|uniform");
                           }
                         }}},
      FQ_SIZE(iterations),
      FQ_SIZE(eval_interval),
      FQ_SIZE(checkpoint_interval),
      FQ_SIZE(eval_samples),
      FQ_SIZE(mmd_samples),
      FQ_SIZE(mmd_layer),
      FQ_SIZE(last_k),
      {"seed", {[](const TrainConfig& c) { return std::to_string(c.seed); },
                [](TrainConfig& c, std::string_view v) { c.seed = to_u64("seed", v); }}},
  };
  return table;
}

#undef FQ_SIZE
#undef FQ_REAL
#undef FQ_BOOL

const Field& field(std::string_view key) {
  for (const auto& [name, f] : fields())
    if (name == key) return f;
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, f] : fields()) k.push_back(name);
    return k;
  }();
  return keys;
}

void apply_setting(TrainConfig& config, std::string_view key, std::string_view value) {
  field(trim(key)).set(config, trim(value));
}

std::string config_value(const TrainConfig& config, std::string_view key) {
  return field(key).get(config);
}

TrainConfig parse_config(std::string_view text, TrainConfig base) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    try {
      apply_setting(base, body.substr(0, eq), body.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

TrainConfig load_config(const std::filesystem::path& path, TrainConfig base) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, std::move(base));
}

std::string to_config_text(const TrainConfig& config) {
  std::string out;
  for (const auto& [name, f] : fields()) out += name + "=" + f.get(config) + "\n";
  return out;
}

}  // namespace fqgan
