#pragma once

// Full network: VGG16-style 13-conv encoder with regional-attention dense
// connections, SAM bottleneck, decoder with regional-attention skip
// connections, AMM blocks and a 1x1 density head at full input resolution.
// Also the binary checkpoint format.

#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "saccn/amm.hpp"
#include "saccn/attention.hpp"

namespace saccn {

struct NetConfig {
    int64_t base_width = 8;    // stage widths = base_width * {1,2,4,8,8}
    int64_t input_channels = 1;
    int ram_reduction = 4;
    int ssa_reduction = 8;
    uint64_t seed = 0;

    std::array<int64_t, 5> stage_widths() const {
        return {base_width, 2 * base_width, 4 * base_width, 8 * base_width, 8 * base_width};
    }
};

template <class T>
struct SaccnModel {
    NetConfig cfg;

    // encoder: 2,2,3,3,3 convs per stage, all 3x3 pad 1, ReLU, 2x2 max-pool
    // between stages
    std::vector<Conv2d<T>> enc;       // 13 layers
    RamBlock<T> ram_dense2, ram_dense3;
    Conv2d<T> proj_i4_from2, proj_i5_from2, proj_i5_from3;

    RamBlock<T> ram_skip2, ram_skip3, ram_skip4, ram_skip5;
    SamBlock<T> sam;
    AmmBlock<T> amm4, amm3, amm2;
    Conv2d<T> fuse4, fuse3, fuse2;    // 1x1 after [AMM(E_k); D_{k+1}]
    Conv2d<T> proj_d4_to3, proj_d3_to2;
    Conv2d<T> head;                   // 1x1 -> 1 channel, ReLU on top

    template <class Fn>
    void for_each_param_impl(Fn&& fn) {
        static const char* enc_names[13] = {"enc1.conv1", "enc1.conv2", "enc2.conv1", "enc2.conv2",
                                            "enc3.conv1", "enc3.conv2", "enc3.conv3", "enc4.conv1",
                                            "enc4.conv2", "enc4.conv3", "enc5.conv1", "enc5.conv2",
                                            "enc5.conv3"};
        for (size_t i = 0; i < enc.size(); ++i) {
            fn(std::string(enc_names[i]) + ".weight", enc[i].weight);
            fn(std::string(enc_names[i]) + ".bias", enc[i].bias);
        }
        for_each_param(ram_dense2, "dense.ram2", fn);
        for_each_param(ram_dense3, "dense.ram3", fn);
        fn("dense.proj_i4_from2.weight", proj_i4_from2.weight);
        fn("dense.proj_i4_from2.bias", proj_i4_from2.bias);
        fn("dense.proj_i5_from2.weight", proj_i5_from2.weight);
        fn("dense.proj_i5_from2.bias", proj_i5_from2.bias);
        fn("dense.proj_i5_from3.weight", proj_i5_from3.weight);
        fn("dense.proj_i5_from3.bias", proj_i5_from3.bias);
        for_each_param(ram_skip2, "skip.ram2", fn);
        for_each_param(ram_skip3, "skip.ram3", fn);
        for_each_param(ram_skip4, "skip.ram4", fn);
        for_each_param(ram_skip5, "skip.ram5", fn);
        for_each_param(sam, "sam", fn);
        for_each_param(amm4, "dec.amm4", fn);
        for_each_param(amm3, "dec.amm3", fn);
        for_each_param(amm2, "dec.amm2", fn);
        fn("dec.fuse4.weight", fuse4.weight);
        fn("dec.fuse4.bias", fuse4.bias);
        fn("dec.fuse3.weight", fuse3.weight);
        fn("dec.fuse3.bias", fuse3.bias);
        fn("dec.fuse2.weight", fuse2.weight);
        fn("dec.fuse2.bias", fuse2.bias);
        fn("dec.proj_d4_to3.weight", proj_d4_to3.weight);
        fn("dec.proj_d4_to3.bias", proj_d4_to3.bias);
        fn("dec.proj_d3_to2.weight", proj_d3_to2.weight);
        fn("dec.proj_d3_to2.bias", proj_d3_to2.bias);
        fn("head.weight", head.weight);
        fn("head.bias", head.bias);
    }
};

template <class T>
struct ParamRef {
    std::string name;
    Tensor<T>* tensor;
};

// Named parameters in construction order (names are unique).
template <class T>
std::vector<ParamRef<T>> params_of(SaccnModel<T>& m) {
    std::vector<ParamRef<T>> out;
    m.for_each_param_impl([&](const std::string& name, Tensor<T>& t) { out.push_back({name, &t}); });
    return out;
}

template <class T>
int64_t param_count(SaccnModel<T>& m) {
    int64_t n = 0;
    m.for_each_param_impl([&](const std::string&, Tensor<T>& t) { n += t.numel(); });
    return n;
}

// Deterministic construction + He-uniform initialization from cfg.seed.
// Every weight stream is derived from (seed, parameter path), so two builds
// from the same config are bit-identical.
template <class T>
SaccnModel<T> build(const NetConfig& cfg) {
    if (cfg.base_width < 1) throw Error("build: base_width must be >= 1");
    if (cfg.input_channels < 1) throw Error("build: input_channels must be >= 1");
    const auto w = cfg.stage_widths();

    SaccnModel<T> m;
    m.cfg = cfg;

    auto conv3 = [&](int64_t ci, int64_t co) { return make_conv2d<T>(ci, co, 3, 3, 1, 1); };
    m.enc.push_back(conv3(cfg.input_channels, w[0]));
    m.enc.push_back(conv3(w[0], w[0]));
    m.enc.push_back(conv3(w[0], w[1]));
    m.enc.push_back(conv3(w[1], w[1]));
    m.enc.push_back(conv3(w[1], w[2]));
    m.enc.push_back(conv3(w[2], w[2]));
    m.enc.push_back(conv3(w[2], w[2]));
    m.enc.push_back(conv3(w[2], w[3]));
    m.enc.push_back(conv3(w[3], w[3]));
    m.enc.push_back(conv3(w[3], w[3]));
    m.enc.push_back(conv3(w[3], w[4]));
    m.enc.push_back(conv3(w[4], w[4]));
    m.enc.push_back(conv3(w[4], w[4]));

    m.ram_dense2 = make_ram<T>(w[1], cfg.ram_reduction);
    m.ram_dense3 = make_ram<T>(w[2], cfg.ram_reduction);
    m.proj_i4_from2 = make_conv2d<T>(w[1], w[2], 1, 1, 0, 0);
    m.proj_i5_from2 = make_conv2d<T>(w[1], w[3], 1, 1, 0, 0);
    m.proj_i5_from3 = make_conv2d<T>(w[2], w[3], 1, 1, 0, 0);

    m.ram_skip2 = make_ram<T>(w[1], cfg.ram_reduction);
    m.ram_skip3 = make_ram<T>(w[2], cfg.ram_reduction);
    m.ram_skip4 = make_ram<T>(w[3], cfg.ram_reduction);
    m.ram_skip5 = make_ram<T>(w[4], cfg.ram_reduction);
    m.sam = make_sam<T>(w[4], cfg.ssa_reduction);

    // decoder widths mirror the encoder stages
    m.amm4 = make_amm<T>(w[3], w[3]);
    m.amm3 = make_amm<T>(w[2], w[2]);
    m.amm2 = make_amm<T>(w[1], w[1]);
    m.fuse4 = make_conv2d<T>(w[3] + w[4], w[3], 1, 1, 0, 0);
    m.fuse3 = make_conv2d<T>(w[2] + w[3], w[2], 1, 1, 0, 0);
    m.fuse2 = make_conv2d<T>(w[1] + w[2], w[1], 1, 1, 0, 0);
    m.proj_d4_to3 = make_conv2d<T>(w[3], w[2], 1, 1, 0, 0);
    m.proj_d3_to2 = make_conv2d<T>(w[2], w[1], 1, 1, 0, 0);
    m.head = make_conv2d<T>(w[1], 1, 1, 1, 0, 0);

    // initialize: convs by their parameter path, blocks by their prefix
    Rng root(cfg.seed);
    init_params(m.enc[0], root.fork("enc1.conv1"));
    init_params(m.enc[1], root.fork("enc1.conv2"));
    init_params(m.enc[2], root.fork("enc2.conv1"));
    init_params(m.enc[3], root.fork("enc2.conv2"));
    init_params(m.enc[4], root.fork("enc3.conv1"));
    init_params(m.enc[5], root.fork("enc3.conv2"));
    init_params(m.enc[6], root.fork("enc3.conv3"));
    init_params(m.enc[7], root.fork("enc4.conv1"));
    init_params(m.enc[8], root.fork("enc4.conv2"));
    init_params(m.enc[9], root.fork("enc4.conv3"));
    init_params(m.enc[10], root.fork("enc5.conv1"));
    init_params(m.enc[11], root.fork("enc5.conv2"));
    init_params(m.enc[12], root.fork("enc5.conv3"));
    init_params(m.ram_dense2, root.fork("dense.ram2"));
    init_params(m.ram_dense3, root.fork("dense.ram3"));
    init_params(m.proj_i4_from2, root.fork("dense.proj_i4_from2"));
    init_params(m.proj_i5_from2, root.fork("dense.proj_i5_from2"));
    init_params(m.proj_i5_from3, root.fork("dense.proj_i5_from3"));
    init_params(m.ram_skip2, root.fork("skip.ram2"));
    init_params(m.ram_skip3, root.fork("skip.ram3"));
    init_params(m.ram_skip4, root.fork("skip.ram4"));
    init_params(m.ram_skip5, root.fork("skip.ram5"));
    init_params(m.sam, root.fork("sam"));
    init_params(m.amm4, root.fork("dec.amm4"));
    init_params(m.amm3, root.fork("dec.amm3"));
    init_params(m.amm2, root.fork("dec.amm2"));
    init_params(m.fuse4, root.fork("dec.fuse4"));
    init_params(m.fuse3, root.fork("dec.fuse3"));
    init_params(m.fuse2, root.fork("dec.fuse2"));
    init_params(m.proj_d4_to3, root.fork("dec.proj_d4_to3"));
    init_params(m.proj_d3_to2, root.fork("dec.proj_d3_to2"));
    init_params(m.head, root.fork("head"));
    return m;
}

// Attaches every parameter to the tape so gradients are recorded. Call once
// per training step with a fresh tape; forward without a bind runs eagerly.
template <class T>
void bind_params(SaccnModel<T>& m, const std::shared_ptr<Tape<T>>& tape) {
    m.for_each_param_impl([&](const std::string&, Tensor<T>& t) { tape->attach(t); });
}

template <class T>
struct EncoderMaps {
    Tensor<T> conv2_2, conv3_3, conv4_3, conv5_3;
};

template <class T>
void check_input_extents(const Tensor<T>& x) {
    if (x.rank() != 4)
        throw ShapeError(msg("forward: input must be N,C,H,W, got ", x.shape().str()));
    if (x.extent(2) % 16 != 0 || x.extent(3) % 16 != 0)
        throw ShapeError(msg("forward: spatial extents must be divisible by 16, got ", x.shape().str()));
}

template <class T>
EncoderMaps<T> encoder_forward(SaccnModel<T>& m, const Tensor<T>& x) {
    check_input_extents(x);
    if (x.extent(1) != m.cfg.input_channels)
        throw ShapeError(msg("forward: input has ", x.extent(1), " channels, model expects ",
                             m.cfg.input_channels));

    auto stage = [&](Tensor<T> t, int first, int count) {
        for (int i = 0; i < count; ++i) t = relu(conv2d(t, m.enc[static_cast<size_t>(first + i)]));
        return t;
    };

    EncoderMaps<T> e;
    Tensor<T> c1 = stage(x, 0, 2);
    e.conv2_2 = stage(downsample(c1, 2), 2, 2);

    // dense connections: each later stage's input sums attention-filtered,
    // downsampled earlier maps with the plain pooled path
    Tensor<T> i3 = downsample(e.conv2_2, 2);
    e.conv3_3 = stage(i3, 4, 3);

    Tensor<T> r2 = ram_forward(e.conv2_2, m.ram_dense2);
    Tensor<T> i4 = add(conv2d(downsample(r2, 4), m.proj_i4_from2), downsample(e.conv3_3, 2));
    e.conv4_3 = stage(i4, 7, 3);

    Tensor<T> r3 = ram_forward(e.conv3_3, m.ram_dense3);
    Tensor<T> i5 = add(add(conv2d(downsample(r2, 8), m.proj_i5_from2),
                           conv2d(downsample(r3, 4), m.proj_i5_from3)),
                       downsample(e.conv4_3, 2));
    e.conv5_3 = stage(i5, 10, 3);
    return e;
}

template <class T>
Tensor<T> decoder_forward(SaccnModel<T>& m, const EncoderMaps<T>& e) {
    Tensor<T> e5 = ram_forward(e.conv5_3, m.ram_skip5);
    Tensor<T> d5 = upsample2x(sam_forward(e5, m.sam));

    Tensor<T> e4 = add(ram_forward(e.conv4_3, m.ram_skip4), d5);
    Tensor<T> d4 = upsample2x(conv2d(concat({amm_forward(e4, m.amm4), d5}, 1), m.fuse4));

    Tensor<T> e3 = add(ram_forward(e.conv3_3, m.ram_skip3), conv2d(d4, m.proj_d4_to3));
    Tensor<T> d3 = upsample2x(conv2d(concat({amm_forward(e3, m.amm3), d4}, 1), m.fuse3));

    Tensor<T> e2 = add(ram_forward(e.conv2_2, m.ram_skip2), conv2d(d3, m.proj_d3_to2));
    Tensor<T> d2 = upsample2x(conv2d(concat({amm_forward(e2, m.amm2), d3}, 1), m.fuse2));

    return relu(conv2d(d2, m.head));
}

template <class T>
Tensor<T> forward(SaccnModel<T>& m, const Tensor<T>& x) {
    return decoder_forward(m, encoder_forward(m, x));
}

// ---------------------------------------------------------------------------
// checkpoint format
//
//   magic "SACCN1" | version u16 LE | u32 LE config length | config text
//   (key=value lines) | tensor table in lexicographic name order, each entry
//   u32 name length + name + u32 rank + u32 extents + raw f32 LE data.
//
// The config block carries the tensor count (tensors=N) plus the NetConfig
// and any extra run state (optimizer step etc). Tensor data is f32 in both
// precision modes.
// ---------------------------------------------------------------------------

namespace ckpt {

constexpr char kMagic[6] = {'S', 'A', 'C', 'C', 'N', '1'};
constexpr uint16_t kVersion = 1;

inline void put_u16(std::string& s, uint16_t v) {
    s.push_back(static_cast<char>(v & 0xff));
    s.push_back(static_cast<char>((v >> 8) & 0xff));
}
inline void put_u32(std::string& s, uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
    std::string bytes;
    size_t pos = 0;
    std::string path;

    void need(size_t n) const {
        if (pos + n > bytes.size())
            throw DataError(msg("checkpoint ", path, ": truncated at offset ", pos));
    }
    uint16_t u16() {
        need(2);
        uint16_t v = static_cast<uint8_t>(bytes[pos]) | (static_cast<uint16_t>(static_cast<uint8_t>(bytes[pos + 1])) << 8);
        pos += 2;
        return v;
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(bytes[pos + static_cast<size_t>(i)])) << (8 * i);
        pos += 4;
        return v;
    }
    std::string str(size_t n) {
        need(n);
        std::string s = bytes.substr(pos, n);
        pos += n;
        return s;
    }
};

struct TensorEntry {
    std::string name;
    std::vector<uint32_t> extents;
    std::vector<float> data;
};

struct File {
    uint16_t version = kVersion;
    std::vector<std::pair<std::string, std::string>> config;  // ordered key=value
    std::vector<TensorEntry> tensors;                         // sorted by name

    std::string config_value(const std::string& key) const {
        for (const auto& [k, v] : config)
            if (k == key) return v;
        throw DataError(msg("checkpoint: missing config key '", key, "'"));
    }
    bool has_config(const std::string& key) const {
        for (const auto& [k, v] : config)
            if (k == key) return true;
        return false;
    }
};

inline std::string serialize(const File& f) {
    std::string cfg;
    for (const auto& [k, v] : f.config) cfg += k + "=" + v + "\n";

    std::string out;
    out.append(kMagic, sizeof(kMagic));
    put_u16(out, f.version);
    put_u32(out, static_cast<uint32_t>(cfg.size()));
    out += cfg;
    for (const auto& t : f.tensors) {
        put_u32(out, static_cast<uint32_t>(t.name.size()));
        out += t.name;
        put_u32(out, static_cast<uint32_t>(t.extents.size()));
        for (uint32_t e : t.extents) put_u32(out, e);
        const size_t off = out.size();
        out.resize(off + t.data.size() * 4);
        std::memcpy(out.data() + off, t.data.data(), t.data.size() * 4);
    }
    return out;
}

inline File parse(std::string bytes, const std::string& path) {
    Reader r{std::move(bytes), 0, path};
    r.need(sizeof(kMagic));
    if (std::memcmp(r.bytes.data(), kMagic, sizeof(kMagic)) != 0)
        throw DataError(msg("checkpoint ", path, ": bad magic, not a SACCN1 file"));
    r.pos = sizeof(kMagic);

    File f;
    f.version = r.u16();
    if (f.version != kVersion)
        throw DataError(msg("checkpoint ", path, ": unsupported version ", f.version));

    const uint32_t cfg_len = r.u32();
    std::string cfg = r.str(cfg_len);
    size_t start = 0;
    while (start < cfg.size()) {
        size_t nl = cfg.find('\n', start);
        if (nl == std::string::npos) nl = cfg.size();
        std::string line = cfg.substr(start, nl - start);
        start = nl + 1;
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError(msg("checkpoint ", path, ": malformed config line '", line, "'"));
        f.config.emplace_back(line.substr(0, eq), line.substr(eq + 1));
    }

    const auto n_tensors = static_cast<size_t>(std::stoull(f.config_value("tensors")));
    for (size_t i = 0; i < n_tensors; ++i) {
        TensorEntry t;
        t.name = r.str(r.u32());
        const uint32_t rank = r.u32();
        if (rank < 1 || rank > 4)
            throw DataError(msg("checkpoint ", path, ": tensor '", t.name, "' has rank ", rank));
        uint64_t numel = 1;
        for (uint32_t d = 0; d < rank; ++d) {
            t.extents.push_back(r.u32());
            numel *= t.extents.back();
        }
        t.data.resize(numel);
        r.need(numel * 4);
        std::memcpy(t.data.data(), r.bytes.data() + r.pos, numel * 4);
        r.pos += numel * 4;
        f.tensors.push_back(std::move(t));
    }
    if (r.pos != r.bytes.size())
        throw DataError(msg("checkpoint ", path, ": ", r.bytes.size() - r.pos, " trailing bytes"));
    return f;
}

}  // namespace ckpt

template <class T>
ckpt::File make_checkpoint(SaccnModel<T>& m,
                           const std::vector<std::pair<std::string, std::string>>& extra_config = {},
                           const std::vector<std::pair<std::string, Tensor<T>>>& extra_tensors = {}) {
    ckpt::File f;
    for (auto& p : params_of(m)) {
        ckpt::TensorEntry t;
        t.name = p.name;
        for (int i = 0; i < p.tensor->rank(); ++i)
            t.extents.push_back(static_cast<uint32_t>(p.tensor->extent(i)));
        t.data.reserve(static_cast<size_t>(p.tensor->numel()));
        for (T v : p.tensor->data()) t.data.push_back(static_cast<float>(v));
        f.tensors.push_back(std::move(t));
    }
    for (const auto& [name, tensor] : extra_tensors) {
        ckpt::TensorEntry t;
        t.name = name;
        for (int i = 0; i < tensor.rank(); ++i) t.extents.push_back(static_cast<uint32_t>(tensor.extent(i)));
        for (T v : tensor.data()) t.data.push_back(static_cast<float>(v));
        f.tensors.push_back(std::move(t));
    }
    std::sort(f.tensors.begin(), f.tensors.end(),
              [](const ckpt::TensorEntry& a, const ckpt::TensorEntry& b) { return a.name < b.name; });

    f.config.emplace_back("format", "saccn-checkpoint");
    f.config.emplace_back("base_width", std::to_string(m.cfg.base_width));
    f.config.emplace_back("input_channels", std::to_string(m.cfg.input_channels));
    f.config.emplace_back("ram_reduction", std::to_string(m.cfg.ram_reduction));
    f.config.emplace_back("ssa_reduction", std::to_string(m.cfg.ssa_reduction));
    f.config.emplace_back("seed", std::to_string(m.cfg.seed));
    f.config.emplace_back("tensors", std::to_string(f.tensors.size()));
    for (const auto& kv : extra_config) f.config.push_back(kv);
    return f;
}

inline void write_file_bytes(const std::string& path, const std::string& bytes) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError(msg("cannot open '", path, "' for writing"));
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw DataError(msg("write failed for '", path, "'"));
}

inline std::string read_file_bytes(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError(msg("cannot open '", path, "'"));
    std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return bytes;
}

template <class T>
void save_checkpoint(SaccnModel<T>& m, const std::string& path,
                     const std::vector<std::pair<std::string, std::string>>& extra_config = {},
                     const std::vector<std::pair<std::string, Tensor<T>>>& extra_tensors = {}) {
    write_file_bytes(path, ckpt::serialize(make_checkpoint(m, extra_config, extra_tensors)));
}

// Copies the file's parameter tensors into an existing model; rejects the
// first name or shape mismatch, naming the offending tensor. Entries outside
// the model's parameter set are returned (optimizer state and the like).
template <class T>
std::map<std::string, Tensor<T>> restore_params(SaccnModel<T>& m, const ckpt::File& f) {
    std::map<std::string, const ckpt::TensorEntry*> table;
    for (const auto& t : f.tensors) table[t.name] = &t;

    for (auto& p : params_of(m)) {
        auto it = table.find(p.name);
        if (it == table.end())
            throw DataError(msg("checkpoint: missing tensor '", p.name, "'"));
        const ckpt::TensorEntry& t = *it->second;
        bool shape_ok = static_cast<int>(t.extents.size()) == p.tensor->rank();
        if (shape_ok)
            for (int i = 0; i < p.tensor->rank(); ++i)
                if (static_cast<int64_t>(t.extents[static_cast<size_t>(i)]) != p.tensor->extent(i)) shape_ok = false;
        if (!shape_ok) {
            std::string got;
            for (size_t i = 0; i < t.extents.size(); ++i)
                got += (i ? "x" : "") + std::to_string(t.extents[i]);
            throw DataError(msg("checkpoint: tensor '", p.name, "' has shape ", got, ", model expects ",
                                p.tensor->shape().str()));
        }
        auto dst = p.tensor->data();
        for (size_t i = 0; i < t.data.size(); ++i) dst[i] = static_cast<T>(t.data[i]);
        table.erase(it);
    }

    std::map<std::string, Tensor<T>> extras;
    for (const auto& [name, entry] : table) {
        Shape s = [&] {
            const auto& e = entry->extents;
            switch (e.size()) {
                case 1: return Shape{e[0]};
                case 2: return Shape{e[0], e[1]};
                case 3: return Shape{e[0], e[1], e[2]};
                default: return Shape{e[0], e[1], e[2], e[3]};
            }
        }();
        std::vector<T> vals(entry->data.size());
        for (size_t i = 0; i < vals.size(); ++i) vals[i] = static_cast<T>(entry->data[i]);
        extras[name] = Tensor<T>::from(s, std::move(vals));
    }
    return extras;
}

template <class T>
struct LoadedCheckpoint {
    SaccnModel<T> model;
    ckpt::File file;
    std::map<std::string, Tensor<T>> extra_tensors;
};

// Rebuilds the model from the embedded config, then restores the weights.
template <class T>
LoadedCheckpoint<T> load_checkpoint(const std::string& path) {
    LoadedCheckpoint<T> out;
    out.file = ckpt::parse(read_file_bytes(path), path);
    NetConfig cfg;
    cfg.base_width = std::stoll(out.file.config_value("base_width"));
    cfg.input_channels = std::stoll(out.file.config_value("input_channels"));
    cfg.ram_reduction = std::stoi(out.file.config_value("ram_reduction"));
    cfg.ssa_reduction = std::stoi(out.file.config_value("ssa_reduction"));
    cfg.seed = std::stoull(out.file.config_value("seed"));
    out.model = build<T>(cfg);
    out.extra_tensors = restore_params(out.model, out.file);
    return out;
}

}  // namespace saccn
