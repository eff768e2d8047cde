#include "specflow/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>
#include <zlib.h>

namespace specflow {

namespace {

constexpr char kMagic[8] = {'S', 'P', 'F', 'L', 'C', 'K', 'P', 'T'};
constexpr std::uint8_t kDtypeF64 = 1;

class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    std::vector<std::uint8_t>& buffer() { return buf_; }

private:
    std::vector<std::uint8_t> buf_;
};

class Reader {
public:
    Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}
    void need(std::size_t n) const {
        if (pos_ + n > size_) throw CheckpointError("checkpoint: truncated file");
    }
    std::uint8_t u8() {
        need(1);
        return data_[pos_++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_++]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_++]) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        const std::uint32_t n = u32();
        need(n);
        std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == size_; }

private:
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

std::uint32_t crc(const std::uint8_t* data, std::size_t n) {
    return static_cast<std::uint32_t>(crc32(0L, data, static_cast<uInt>(n)));
}

}  // namespace

const CheckpointArray& Checkpoint::at(const std::string& name) const {
    for (const auto& a : arrays) {
        if (a.name == name) return a;
    }
    throw CheckpointError("checkpoint: missing array '" + name + "'");
}

bool Checkpoint::contains(const std::string& name) const {
    for (const auto& a : arrays) {
        if (a.name == name) return true;
    }
    return false;
}

void Checkpoint::put(std::string name, const Eigen::MatrixXd& m) {
    CheckpointArray a{std::move(name),
                      {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())},
                      {}};
    // Row-major payload.
    a.data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) a.data.push_back(m(r, c));
    }
    arrays.push_back(std::move(a));
}

void Checkpoint::put(std::string name, const Eigen::VectorXd& v) {
    arrays.push_back({std::move(name), {static_cast<std::uint64_t>(v.size())},
                      std::vector<double>(v.data(), v.data() + v.size())});
}

Eigen::MatrixXd Checkpoint::matrix(const std::string& name) const {
    const auto& a = at(name);
    if (a.shape.size() != 2) throw CheckpointError("checkpoint: '" + name + "' is not a matrix");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(a.shape[0]), static_cast<Eigen::Index>(a.shape[1]));
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = a.data[k++];
    }
    return m;
}

Eigen::VectorXd Checkpoint::vector(const std::string& name) const {
    const auto& a = at(name);
    if (a.shape.size() != 1) throw CheckpointError("checkpoint: '" + name + "' is not a vector");
    return Eigen::Map<const Eigen::VectorXd>(a.data.data(), static_cast<Eigen::Index>(a.data.size()));
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
    Writer w;
    w.bytes(kMagic, sizeof(kMagic));
    w.u32(Checkpoint::kVersion);
    w.str(ckpt.meta_json);
    w.u32(static_cast<std::uint32_t>(ckpt.arrays.size()));
    for (const auto& a : ckpt.arrays) {
        std::uint64_t count = 1;
        for (auto d : a.shape) count *= d;
        if (count != a.data.size()) {
            throw CheckpointError("checkpoint: array '" + a.name + "' shape does not match data");
        }
        w.str(a.name);
        w.u8(kDtypeF64);
        w.u8(static_cast<std::uint8_t>(a.shape.size()));
        for (auto d : a.shape) w.u64(d);
        for (double v : a.data) w.f64(v);
    }
    auto& buf = w.buffer();
    const std::uint32_t sum = crc(buf.data(), buf.size());
    w.u32(sum);
    return std::move(buf);
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < sizeof(kMagic) + 8) throw CheckpointError("checkpoint: truncated file");
    if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
        throw CheckpointError("checkpoint: bad magic");
    }
    Reader head(bytes.data() + sizeof(kMagic), 4);
    const std::uint32_t version = head.u32();
    if (version != Checkpoint::kVersion) {
        throw CheckpointError("checkpoint: format version " + std::to_string(version) +
                              " is not supported (expected " +
                              std::to_string(Checkpoint::kVersion) + ")");
    }
    const std::size_t body = bytes.size() - 4;
    Reader tail(bytes.data() + body, 4);
    if (tail.u32() != crc(bytes.data(), body)) {
        throw CheckpointError("checkpoint: checksum mismatch (corrupted or truncated file)");
    }

    Reader r(bytes.data() + sizeof(kMagic) + 4, body - sizeof(kMagic) - 4);
    Checkpoint out;
    out.meta_json = r.str();
    const std::uint32_t n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
        CheckpointArray a;
        a.name = r.str();
        if (r.u8() != kDtypeF64) throw CheckpointError("checkpoint: unsupported dtype in '" + a.name + "'");
        const std::uint8_t ndim = r.u8();
        std::uint64_t count = 1;
        for (std::uint8_t d = 0; d < ndim; ++d) {
            a.shape.push_back(r.u64());
            count *= a.shape.back();
        }
        r.need(count * 8);
        a.data.resize(count);
        for (auto& v : a.data) v = r.f64();
        out.arrays.push_back(std::move(a));
    }
    if (!r.done()) throw CheckpointError("checkpoint: trailing bytes after the last array");
    return out;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const auto bytes = encode_checkpoint(ckpt);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("checkpoint: cannot write " + path.string());
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw CheckpointError("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("checkpoint: cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

namespace {

void put_mlp(Checkpoint& c, const std::string& prefix, const nn::Mlp& net) {
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        c.put(prefix + ".w" + std::to_string(l), net.weights[l]);
        c.put(prefix + ".b" + std::to_string(l), net.biases[l]);
    }
}

nn::Mlp get_mlp(const Checkpoint& c, const std::string& prefix, const std::vector<int>& sizes) {
    nn::Mlp net;
    net.layer_sizes = sizes;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        net.weights.push_back(c.matrix(prefix + ".w" + std::to_string(l)));
        net.biases.push_back(c.vector(prefix + ".b" + std::to_string(l)));
        if (net.weights.back().rows() != sizes[l + 1] || net.weights.back().cols() != sizes[l] ||
            net.biases.back().size() != sizes[l + 1]) {
            throw CheckpointError("checkpoint: layer " + std::to_string(l) + " of " + prefix +
                                  " has the wrong shape");
        }
    }
    return net;
}

void put_scaler(Checkpoint& c, const std::string& prefix, const Standardizer& s) {
    c.put(prefix + ".mean", s.mean());
    c.put(prefix + ".std", s.std());
}

Standardizer get_scaler(const Checkpoint& c, const std::string& prefix) {
    return Standardizer(c.vector(prefix + ".mean"), c.vector(prefix + ".std"));
}

}  // namespace

Checkpoint pack_models(const PolicyModels& models, const std::string& meta_json) {
    nlohmann::json meta = nlohmann::json::parse(meta_json);
    const auto& shape = models.main.shape();
    meta["shape"] = {{"horizon", shape.horizon},
                     {"pos_dims", shape.layout.pos_dims},
                     {"rot_dims", shape.layout.rot_dims},
                     {"world_dims", shape.world_dims},
                     {"state_dims", shape.state_dims},
                     {"num_tasks", shape.num_tasks},
                     {"embedding_dims", shape.embedding_dims}};
    meta["encoder_sizes"] = models.main.encoder().layer_sizes;
    meta["field_sizes"] = models.main.field().layer_sizes;
    meta["skip_gain"] = models.main.skip_gain();
    if (models.draft) meta["draft_sizes"] = models.draft->net().layer_sizes;

    Checkpoint c;
    c.meta_json = meta.dump();
    put_mlp(c, "encoder", models.main.encoder());
    put_mlp(c, "field", models.main.field());
    put_scaler(c, "scaler.world", models.main.scalers().world);
    put_scaler(c, "scaler.state", models.main.scalers().state);
    put_scaler(c, "scaler.actions", models.actions);
    if (models.draft) {
        put_mlp(c, "draft", models.draft->net());
        put_scaler(c, "draft.scaler.world", models.draft->scalers().world);
        put_scaler(c, "draft.scaler.state", models.draft->scalers().state);
    }
    return c;
}

PolicyModels unpack_models(const Checkpoint& c) {
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(c.meta_json);
        PolicyShape shape;
        const auto& s = meta.at("shape");
        shape.horizon = s.at("horizon");
        shape.layout = ChannelLayout{s.at("pos_dims").get<int>(), s.at("rot_dims").get<int>()};
        shape.world_dims = s.at("world_dims");
        shape.state_dims = s.at("state_dims");
        shape.num_tasks = s.at("num_tasks");
        shape.embedding_dims = s.at("embedding_dims");

        FeatureScalers scalers{get_scaler(c, "scaler.world"), get_scaler(c, "scaler.state")};
        FlowPolicy main(shape, scalers,
                        get_mlp(c, "encoder", meta.at("encoder_sizes").get<std::vector<int>>()),
                        get_mlp(c, "field", meta.at("field_sizes").get<std::vector<int>>()),
                        meta.at("skip_gain").get<double>());
        std::optional<DraftModel> draft;
        if (meta.contains("draft_sizes")) {
            FeatureScalers ds{get_scaler(c, "draft.scaler.world"), get_scaler(c, "draft.scaler.state")};
            draft.emplace(shape, ds,
                          get_mlp(c, "draft", meta.at("draft_sizes").get<std::vector<int>>()));
        }
        return PolicyModels{std::move(main), std::move(draft), get_scaler(c, "scaler.actions")};
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("checkpoint: bad metadata: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw CheckpointError(std::string("checkpoint: inconsistent model: ") + e.what());
    }
}

}  // namespace specflow
