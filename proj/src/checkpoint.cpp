#include <optional>
#include <sstream>

#include "fqgan/config.hpp"
#include "fqgan/harness.hpp"
#include "fqgan/io.hpp"

namespace fqgan {

namespace {

constexpr const char* kHeader = "fqgan-checkpoint 1";

void write_tensors(std::ostream& out, const std::vector<Tensor>& ts) {
  out << ts.size() << '\n';
  for (const Tensor& t : ts) {
    out << t.rank();
    for (auto e : t.shape()) out << ' ' << e;
    out << '\n';
    for (std::size_t i = 0; i < t.size(); ++i) out << (i ? " " : "") << format_hex(t[i]);
    out << '\n';
  }
}

void write_adam(std::ostream& out, const Adam& a) {
  out << "adam " << a.steps() << '\n';
  write_tensors(out, a.first_moment());
  write_tensors(out, a.second_moment());
}

void write_rng(std::ostream& out, const char* name, const Rng& rng) {
  const auto& s = rng.state();
  out << "rng " << name;
  for (auto w : s.s) out << ' ' << w;
  out << ' ' << (s.has_spare ? 1 : 0) << ' ' << format_hex(s.spare) << '\n';
}

class Reader {
 public:
  Reader(std::istream& in, const std::filesystem::path& path) : in_(in), path_(path) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw IoError(path_.string() + ": corrupt checkpoint (" + what + ")");
  }

  std::string token() {
    std::string t;
    if (!(in_ >> t)) fail("unexpected end of file");
    return t;
  }

  void expect(std::string_view word) {
    if (token() != word) fail("expected '" + std::string(word) + "'");
  }

  std::uint64_t count() {
    const std::string t = token();
    try {
      std::size_t used = 0;
      const auto v = std::stoull(t, &used);
      if (used != t.size()) fail("bad integer '" + t + "'");
      return v;
    } catch (const std::logic_error&) {
      fail("bad integer '" + t + "'");
    }
  }

  double real() {
    const std::string t = token();
    double v = 0.0;
    if (!parse_double(t, v)) fail("bad number '" + t + "'");
    return v;
  }

  void tensors_into(std::vector<Tensor>& dst) {
    if (count() != dst.size()) fail("tensor count does not match the configuration");
    for (Tensor& t : dst) {
      Shape shape(count());
      for (auto& e : shape) e = count();
      if (shape != t.shape()) fail("tensor shape " + to_string(shape) + " does not match " + to_string(t.shape()));
      for (double& v : t.values()) v = real();
    }
  }

  void adam_into(Adam& a) {
    expect("adam");
    a.set_steps(count());
    tensors_into(a.first_moment());
    tensors_into(a.second_moment());
  }

  void rng_into(std::string_view name, Rng& rng) {
    expect("rng");
    expect(name);
    Rng::State s;
    for (auto& w : s.s) w = count();
    s.has_spare = count() != 0;
    s.spare = real();
    rng.set_state(s);
  }

  std::string line() {
    std::string l;
    if (!std::getline(in_, l)) fail("unexpected end of file");
    return l;
  }

 private:
  std::istream& in_;
  const std::filesystem::path& path_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const TrainState& st,
                     const std::vector<RunRecord>& records) {
  std::ostringstream out;
  const std::string config = to_config_text(st.config);
  std::size_t config_lines = 0;
  for (char ch : config) config_lines += ch == '\n';
  out << kHeader << '\n' << "config " << config_lines << '\n' << config;
  out << "iteration " << st.iteration << '\n';
  write_rng(out, "data", st.data_rng);
  write_rng(out, "latent", st.latent_rng);
  out << "generator ";
  write_tensors(out, st.generator.parameters());
  write_adam(out, st.g_opt);
  out << "discriminator ";
  write_tensors(out, st.discriminator.net().parameters());
  write_adam(out, st.d_opt);
  out << "codebooks " << st.discriminator.fq_layers().size() << '\n';
  for (const FqLayer& l : st.discriminator.fq_layers()) {
    out << "layer " << l.after_hidden << '\n';
    l.codebook.write(out);
  }
  out << "codebook_opt " << st.codebook_opt.size() << '\n';
  for (const Adam& a : st.codebook_opt) write_adam(out, a);
  out << "records " << records.size() << '\n';
  for (const RunRecord& r : records) out << to_csv_row(r) << ' ' << format_hex(r.wall_seconds) << '\n';
  out << "end\n";
  write_file_atomic(path, out.str());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  Reader rd(in, path);
  if (trim(rd.line()) != kHeader) rd.fail("unknown header");
  rd.expect("config");
  const std::size_t config_lines = rd.count();
  rd.line();
  std::string config_text;
  for (std::size_t i = 0; i < config_lines; ++i) config_text += rd.line() + '\n';
  TrainConfig config;
  try {
    config = parse_config(config_text);
  } catch (const ConfigError& e) {
    rd.fail(e.what());
  }

  Checkpoint cp{TrainState::create(config), {}};
  TrainState& st = cp.state;
  rd.expect("iteration");
  st.iteration = rd.count();
  rd.rng_into("data", st.data_rng);
  rd.rng_into("latent", st.latent_rng);
  rd.expect("generator");
  rd.tensors_into(st.generator.parameters());
  rd.adam_into(st.g_opt);
  rd.expect("discriminator");
  rd.tensors_into(st.discriminator.net().parameters());
  rd.adam_into(st.d_opt);
  rd.expect("codebooks");
  if (rd.count() != st.discriminator.fq_layers().size()) rd.fail("codebook count");
  for (FqLayer& l : st.discriminator.fq_layers()) {
    rd.expect("layer");
    if (rd.count() != l.after_hidden) rd.fail("codebook layer");
    in >> std::ws;
    std::optional<vq::Codebook> cb;
    try {
      cb = vq::Codebook::read(in);
    } catch (const std::exception& e) {
      rd.fail(e.what());
    }
    if (cb->size() != l.codebook.size() || cb->dim() != l.codebook.dim()) rd.fail("codebook shape");
    l.codebook = std::move(*cb);
  }
  rd.expect("codebook_opt");
  if (rd.count() != st.codebook_opt.size()) rd.fail("codebook optimizer count");
  for (Adam& a : st.codebook_opt) rd.adam_into(a);
  rd.expect("records");
  const std::size_t n = rd.count();
  for (std::size_t i = 0; i < n; ++i) {
    const std::string row = rd.token();
    try {
      RunRecord r = parse_csv_row(row);
      r.wall_seconds = rd.real();
      cp.records.push_back(std::move(r));
    } catch (const std::invalid_argument& e) {
      rd.fail(e.what());
    }
  }
  rd.expect("end");
  return cp;
}

}  // namespace fqgan
