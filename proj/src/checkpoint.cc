// Checkpoint layout (text, one token group per line):
//
//   simal-autoencoder 1
//   dims <input> <latent> <hidden>
//   lineage <count> <seed>...
//   layer <name> <in> <out> <logistic|tanh>
//   w <in*out hex floats, input-major>
//   b <out hex floats>
//   ... one layer/w/b triple per layer, in ModelParams::layers() order
//   end
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "simal/autoencoder.h"
#include "simal/errors.h"

namespace simal {

namespace {

constexpr std::string_view kMagic = "simal-autoencoder";
constexpr int kVersion = 1;

void put_hex(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%a", v);
  out += ' ';
  out += buf;
}

double parse_hex(const std::string& token) {
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end != token.c_str() + token.size()) throw ParseError("bad number '" + token + "' in checkpoint");
  return v;
}

std::string expect_word(std::istream& in, std::string_view what) {
  std::string word;
  if (!(in >> word)) throw ParseError("checkpoint truncated, expected " + std::string(what));
  return word;
}

void expect_keyword(std::istream& in, std::string_view keyword) {
  const std::string word = expect_word(in, keyword);
  if (word != keyword) {
    throw ParseError("checkpoint: expected '" + std::string(keyword) + "', got '" + word + "'");
  }
}

std::size_t expect_size(std::istream& in, std::string_view what) {
  const std::string word = expect_word(in, what);
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(word, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != word.size()) throw ParseError("checkpoint: bad " + std::string(what) + " '" + word + "'");
  return static_cast<std::size_t>(v);
}

}  // namespace

std::string checkpoint_to_string(const ModelParams& params) {
  std::string out;
  out += std::string(kMagic) + ' ' + std::to_string(kVersion) + '\n';
  const ModelDims& dims = params.dims();
  out += "dims " + std::to_string(dims.input) + ' ' + std::to_string(dims.latent) + ' ' +
         std::to_string(dims.hidden) + '\n';
  out += "lineage " + std::to_string(params.lineage().size());
  for (std::uint64_t s : params.lineage()) out += ' ' + std::to_string(s);
  out += '\n';
  for (std::size_t l = 0; l < params.layers().size(); ++l) {
    const LayerSpec& spec = params.layers()[l];
    out += "layer " + spec.name + ' ' + std::to_string(spec.in) + ' ' + std::to_string(spec.out) +
           (spec.activation == Activation::kLogistic ? " logistic\n" : " tanh\n");
    out += 'w';
    for (double v : params.weights(l)) put_hex(out, v);
    out += "\nb";
    for (double v : params.bias(l)) put_hex(out, v);
    out += '\n';
  }
  out += "end\n";
  return out;
}

ModelParams checkpoint_from_string(std::string_view text) {
  std::istringstream in{std::string(text)};
  expect_keyword(in, kMagic);
  const std::size_t version = expect_size(in, "version");
  if (version != kVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version));
  }
  expect_keyword(in, "dims");
  ModelDims dims;
  dims.input = expect_size(in, "input dimension");
  dims.latent = expect_size(in, "latent dimension");
  dims.hidden = expect_size(in, "hidden width");
  ModelParams params(dims);

  expect_keyword(in, "lineage");
  const std::size_t n_seeds = expect_size(in, "lineage count");
  for (std::size_t i = 0; i < n_seeds; ++i) {
    const std::string word = expect_word(in, "lineage seed");
    params.append_lineage(std::stoull(word));
  }

  for (std::size_t l = 0; l < params.layers().size(); ++l) {
    const LayerSpec& spec = params.layers()[l];
    expect_keyword(in, "layer");
    expect_keyword(in, spec.name);
    if (expect_size(in, "layer input") != spec.in || expect_size(in, "layer output") != spec.out) {
      throw ParseError("checkpoint: layer " + spec.name + " has unexpected shape");
    }
    expect_keyword(in, spec.activation == Activation::kLogistic ? "logistic" : "tanh");
    expect_keyword(in, "w");
    for (double& v : params.weights(l)) v = parse_hex(expect_word(in, "weight"));
    expect_keyword(in, "b");
    for (double& v : params.bias(l)) v = parse_hex(expect_word(in, "bias"));
  }
  expect_keyword(in, "end");
  return params;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << checkpoint_to_string(params);
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_string(buf.str());
}

}  // namespace simal
