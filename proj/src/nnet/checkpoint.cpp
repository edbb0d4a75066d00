#include "gjam/nnet/checkpoint.hpp"

#include "gjam/bytes.hpp"
#include "gjam/error.hpp"

namespace gjam::nnet {

namespace {

constexpr char kMagic[4] = {'G', 'J', 'N', 'N'};

void put_block(ByteWriter& w, const std::vector<double>& v) {
  for (double x : v) w.f32(static_cast<float>(x));
}

void get_block(ByteReader& r, std::vector<double>& v) {
  for (double& x : v) x = static_cast<double>(r.f32());
}

template <class F>
void for_each_conv(Network& net, F&& f) {
  f(net.stem());
  for (ResidualBlock& b : net.blocks()) {
    f(b.conv1);
    f(b.conv2);
    f(b.proj);
  }
}

}  // namespace

std::vector<std::uint8_t> serialize(const Network& net_in) {
  Network& net = const_cast<Network&>(net_in);  // traversal only
  const Architecture& a = net.arch();
  ByteWriter w;
  w.raw(kMagic, 4);
  w.u16(kCheckpointVersion);
  w.u16(static_cast<std::uint16_t>(a.in_channels));
  w.u16(static_cast<std::uint16_t>(a.freq_pool));
  w.u16(static_cast<std::uint16_t>(a.stem_width));
  w.u16(static_cast<std::uint16_t>(a.widths.size()));
  for (int x : a.widths) w.u16(static_cast<std::uint16_t>(x));
  w.u16(static_cast<std::uint16_t>(net.heads().size()));
  for (const HeadLayer& h : net.heads()) {
    w.str16(h.desc.id);
    w.u8(static_cast<std::uint8_t>(h.desc.kind));
    w.u16(static_cast<std::uint16_t>(h.desc.n_c));
    w.f64(h.desc.weight);
    w.f64(h.stats.mean);
    w.f64(h.stats.std);
  }
  put_block(w, net.input_norm().mean);
  put_block(w, net.input_norm().scale);
  for_each_conv(net, [&w](Conv2d& c) {
    put_block(w, c.weight);
    put_block(w, c.bias);
    put_block(w, c.scale);
  });
  for (const HeadLayer& h : net.heads()) {
    put_block(w, h.weight);
    put_block(w, h.bias);
  }
  return std::move(w.bytes());
}

Network deserialize(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes.data(), bytes.size());
  char magic[4] = {};
  if (bytes.size() < 4) throw Error(ErrorCode::BadMagic, "not a GJNN checkpoint");
  r.raw(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw Error(ErrorCode::BadMagic, "not a GJNN checkpoint");
  const std::uint16_t version = r.u16();
  if (version != kCheckpointVersion)
    throw Error(ErrorCode::VersionMismatch, "checkpoint version " + std::to_string(version) + " unsupported");
  Architecture a;
  a.in_channels = r.u16();
  a.freq_pool = r.u16();
  a.stem_width = r.u16();
  a.widths.resize(r.u16());
  for (int& x : a.widths) x = r.u16();
  std::vector<TaskHead> heads(r.u16());
  std::vector<TargetStats> stats(heads.size());
  for (std::size_t i = 0; i < heads.size(); ++i) {
    heads[i].id = r.str16();
    const std::uint8_t kind = r.u8();
    if (kind > 1) throw Error(ErrorCode::TruncatedRecord, "bad head kind");
    heads[i].kind = static_cast<HeadKind>(kind);
    heads[i].n_c = r.u16();
    heads[i].weight = r.f64();
    stats[i].mean = r.f64();
    stats[i].std = r.f64();
  }
  Network net(a, heads, 0);
  get_block(r, net.input_norm().mean);
  get_block(r, net.input_norm().scale);
  for_each_conv(net, [&r](Conv2d& c) {
    get_block(r, c.weight);
    get_block(r, c.bias);
    get_block(r, c.scale);
  });
  for (std::size_t i = 0; i < heads.size(); ++i) {
    HeadLayer& h = net.heads()[i];
    h.stats = stats[i];
    get_block(r, h.weight);
    get_block(r, h.bias);
  }
  if (r.remaining() != 0) throw Error(ErrorCode::TruncatedRecord, "trailing bytes after checkpoint");
  return net;
}

void save_checkpoint(const Network& net, const std::filesystem::path& path) { write_file(path.string(), serialize(net)); }

Network load_checkpoint(const std::filesystem::path& path) { return deserialize(read_file(path.string())); }

}  // namespace gjam::nnet
