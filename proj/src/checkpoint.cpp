#include "nssolver/checkpoint.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace nss {

namespace {

constexpr char kMagic[4] = {'N', 'S', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

void write_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_u64(out, bits);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw CheckpointError("checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw CheckpointError("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double read_f64(std::istream& in) {
  std::uint64_t bits = read_u64(in);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void save_parameters(const std::string& path, const ad::ParameterStore& store) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("checkpoint: cannot open " + path);
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  write_u64(out, static_cast<std::uint64_t>(store.size()));
  for (int i = 0; i < store.size(); ++i) {
    const ad::Parameter& p = store.at(i);
    write_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    write_u32(out, 2);
    write_u64(out, static_cast<std::uint64_t>(p.value.rows()));
    write_u64(out, static_cast<std::uint64_t>(p.value.cols()));
    for (Eigen::Index r = 0; r < p.value.rows(); ++r)
      for (Eigen::Index c = 0; c < p.value.cols(); ++c)
        write_f64(out, p.value(r, c));
  }
  if (!out) throw CheckpointError("checkpoint: write failed for " + path);
}

void load_parameters(const std::string& path, ad::ParameterStore& store) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw CheckpointError("checkpoint: bad magic in " + path);
  std::uint32_t version = read_u32(in);
  if (version != kVersion)
    throw CheckpointError("checkpoint: unsupported version " +
                          std::to_string(version));
  std::uint64_t count = read_u64(in);
  if (count != static_cast<std::uint64_t>(store.size()))
    throw CheckpointError("checkpoint: parameter count mismatch");
  for (std::uint64_t k = 0; k < count; ++k) {
    std::uint32_t name_len = read_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw CheckpointError("checkpoint: truncated name");
    ad::Parameter* p = store.find(name);
    if (!p) throw CheckpointError("checkpoint: unknown parameter " + name);
    std::uint32_t ndim = read_u32(in);
    if (ndim != 2) throw CheckpointError("checkpoint: bad rank for " + name);
    std::uint64_t rows = read_u64(in), cols = read_u64(in);
    if (rows != static_cast<std::uint64_t>(p->value.rows()) ||
        cols != static_cast<std::uint64_t>(p->value.cols()))
      throw CheckpointError("checkpoint: shape mismatch for " + name);
    for (std::uint64_t r = 0; r < rows; ++r)
      for (std::uint64_t c = 0; c < cols; ++c)
        p->value(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            read_f64(in);
  }
}

namespace {

nlohmann::ordered_json seq_vocab_json(const SeqVocab& v) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v.token(i));
  return arr;
}

SeqVocab seq_vocab_from_json(const nlohmann::json& arr) {
  // rebuild by feeding the tokens after the two specials in order
  std::vector<std::string> toks;
  for (std::size_t i = 2; i < arr.size(); ++i)
    toks.push_back(arr[i].get<std::string>());
  return SeqVocab::build({toks});
}

}  // namespace

void save_model(const std::string& path, const NsModel& model,
                const TrainingConfig& config) {
  save_parameters(path, model.store);
  nlohmann::ordered_json meta;
  meta["config"] = nlohmann::json::parse(config.to_json());
  meta["embed_dim"] = model.dims.embed_dim;
  meta["hidden_dim"] = model.dims.hidden_dim;
  meta["lm_embed_dim"] = model.dims.lm_embed_dim;
  meta["lm_hidden_dim"] = model.dims.lm_hidden_dim;
  meta["tag_embed_dim"] = model.dims.tag_embed_dim;
  meta["max_decode_len"] = model.dims.max_decode_len;
  meta["max_count"] = model.max_count;
  meta["max_length"] = model.max_length;
  meta["vocab"] = model.vocab.tokens();
  nlohmann::ordered_json consts = nlohmann::ordered_json::array();
  for (const auto& c : model.constant_vocab) consts.push_back(c.value);
  meta["constants"] = consts;
  meta["pos_vocab"] = seq_vocab_json(model.pos_vocab);
  meta["eq_vocab"] = seq_vocab_json(model.eq_vocab);
  std::ofstream out(path + ".meta.json");
  if (!out) throw CheckpointError("checkpoint: cannot open " + path + ".meta.json");
  out << meta.dump(2) << "\n";
}

LoadedModel load_model(const std::string& path) {
  std::ifstream meta_in(path + ".meta.json");
  if (!meta_in)
    throw CheckpointError("checkpoint: missing metadata " + path + ".meta.json");
  nlohmann::json meta;
  try {
    meta_in >> meta;
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("checkpoint: corrupt metadata: ") + e.what());
  }

  LoadedModel out;
  out.config = TrainingConfig::from_json_text(meta.at("config").dump());
  ModelDims dims;
  dims.embed_dim = meta.at("embed_dim").get<int>();
  dims.hidden_dim = meta.at("hidden_dim").get<int>();
  dims.lm_embed_dim = meta.at("lm_embed_dim").get<int>();
  dims.lm_hidden_dim = meta.at("lm_hidden_dim").get<int>();
  dims.tag_embed_dim = meta.at("tag_embed_dim").get<int>();
  dims.max_decode_len = meta.at("max_decode_len").get<int>();

  std::vector<std::string> vocab_tokens;
  for (const auto& t : meta.at("vocab")) vocab_tokens.push_back(t.get<std::string>());
  Vocabulary vocab = Vocabulary::from_tokens(std::move(vocab_tokens));
  std::vector<Symbol> constants;
  for (const auto& v : meta.at("constants"))
    constants.push_back(Symbol::constant(v.get<double>()));

  out.model = std::make_unique<NsModel>(
      dims, std::move(vocab), std::move(constants),
      seq_vocab_from_json(meta.at("pos_vocab")),
      seq_vocab_from_json(meta.at("eq_vocab")), meta.at("max_count").get<int>(),
      meta.at("max_length").get<int>(), /*init_seed=*/0);
  load_parameters(path, out.model->store);
  return out;
}

}  // namespace nss
