#include <cstring>
#include <random>
#include <sstream>

#include "doctest.h"
#include "dfnet/checkpoint.hpp"
#include "dfnet/dataset.hpp"
#include "dfnet/error.hpp"
#include "dfnet/flow.hpp"
#include "dfnet/network.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace dfnet;

namespace {

NetworkSpec small_spec(InputVariant v) {
  NetworkSpec s;
  s.variant = v;
  s.encoder_channels = {4, 6, 8, 8, 8};
  s.decoder_channels = {6, 4, 1};
  return s;
}

std::string output_hash(const Tensor<float>& t) {
  std::string bytes(t.size() * sizeof(float), '\0');
  std::memcpy(bytes.data(), t.raw(), bytes.size());
  return fnv1a_hex(bytes);
}

Tensor<float> seeded_input(std::size_t c, std::size_t h, std::size_t w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-0.5f, 0.5f);
  Tensor<float> x({1, c, h, w});
  for (float& v : x.data()) v = u(rng);
  return x;
}

}  // namespace

TEST_CASE("spec validation") {
  NetworkSpec s;
  CHECK_NOTHROW(s.validate());
  CHECK(s.input_channels() == 5);
  s.variant = InputVariant::SingleImage;
  CHECK(s.input_channels() == 3);
  auto bad = s;
  bad.encoder_channels = {8, 8, 8, 8};
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = s;
  bad.encoder_strides = {2, 2, 1, 2, 2};
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = s;
  bad.decoder_channels = {8, 8, 2};
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = s;
  bad.decoder_upsamples = {4, 2, 2};
  CHECK_THROWS_AS(bad.validate(), UsageError);
}

TEST_CASE("descriptor round trip") {
  NetworkSpec s = small_spec(InputVariant::SingleImage);
  s.input_mean = {0.125, 0.3333333333333333, 0.7};
  std::map<std::string, std::string> extra;
  const auto parsed = parse_descriptor(s.to_descriptor() + "; seed=7", &extra);
  CHECK(parsed == s);
  CHECK(extra.at("seed") == "7");
  CHECK_THROWS_AS(parse_descriptor("nonsense"), DataError);
}

TEST_CASE("parameter count matches closed form") {
  for (auto v : {InputVariant::SingleImage, InputVariant::ImagePlusFlow}) {
    NetworkSpec s;
    s.variant = v;
    Network<float> net(s, 1);
    CHECK(net.params().parameter_count() == expected_parameter_count(s));
    CHECK(net.params().size() == 16);
  }
  // Hand count for the small spec with 3 input channels.
  const std::size_t enc = (3 * 9 + 1) * 4 + (4 * 9 + 1) * 6 + (6 * 9 + 1) * 8 + 2 * ((8 * 9 + 1) * 8);
  const std::size_t dec = (8 * 16 + 1) * 6 + (6 * 16 + 1) * 4 + (4 * 64 + 1) * 1;
  CHECK(expected_parameter_count(small_spec(InputVariant::SingleImage)) == enc + dec);
}

TEST_CASE("full resolution output with bottleneck at one sixteenth") {
  for (auto v : {InputVariant::SingleImage, InputVariant::ImagePlusFlow}) {
    NetworkSpec s = small_spec(v);
    Network<float> net(s, 3);
    Tensor<float> x({1, std::size_t(s.input_channels()), 96, 320}, 0.1f);
    ForwardCache<float> cache;
    const auto out = net.forward(x, &cache);
    CHECK(out.log_depth.shape() == Shape{1, 1, 96, 320});
    CHECK(cache.bottleneck().dim(2) == 6);
    CHECK(cache.bottleneck().dim(3) == 20);
  }
  std::mt19937_64 rng(4);
  Network<float> net(small_spec(InputVariant::SingleImage), 4);
  for (int trial = 0; trial < 6; ++trial) {
    const std::size_t h = 16 * std::uniform_int_distribution<std::size_t>(1, 6)(rng);
    const std::size_t w = 16 * std::uniform_int_distribution<std::size_t>(1, 6)(rng);
    const auto out = net.forward(Tensor<float>({2, 3, h, w}, 0.2f));
    CHECK(out.log_depth.shape() == Shape{2, 1, h, w});
  }
  CHECK_THROWS_AS(net.forward(Tensor<float>({1, 3, 40, 32})), UsageError);
  CHECK_THROWS_AS(net.forward(Tensor<float>({1, 5, 32, 32})), UsageError);
}

TEST_CASE("zero parameters give unit metric depth") {
  NetworkSpec s = small_spec(InputVariant::ImagePlusFlow);
  Network<float> net(s, 5);
  for (auto& e : net.params().entries()) e.tensor.fill(0.0f);
  const auto out = net.forward(Tensor<float>({1, 5, 32, 32}, 0.0f));
  const auto depth = out.metric_depth();
  for (std::size_t i = 0; i < depth.size(); ++i) {
    CHECK(out.log_depth[i] == 0.0f);
    CHECK(depth[i] == 1.0f);
  }
}

TEST_CASE("outputs are finite and positive") {
  Network<float> net(small_spec(InputVariant::SingleImage), 6);
  const auto out = net.forward(seeded_input(3, 48, 64, 6));
  const auto depth = out.metric_depth();
  CHECK(all_finite<float>(out.log_depth.data()));
  for (float d : depth.data()) CHECK(d > 0.0f);
}

TEST_CASE("construction and forward are deterministic") {
  const NetworkSpec s = small_spec(InputVariant::ImagePlusFlow);
  Network<float> a(s, 11), b(s, 11), c(s, 12);
  for (std::size_t i = 0; i < a.params().size(); ++i) {
    const auto& ta = a.params().entries()[i].tensor;
    const auto& tb = b.params().entries()[i].tensor;
    CHECK(std::memcmp(ta.raw(), tb.raw(), ta.size() * sizeof(float)) == 0);
  }
  CHECK(a.params().get("enc1.weight")[0] != c.params().get("enc1.weight")[0]);
  const auto x = seeded_input(5, 32, 64, 1);
  CHECK(output_hash(a.forward(x).log_depth) == output_hash(b.forward(x).log_depth));
}

TEST_CASE("golden output") {
  Network<float> net(small_spec(InputVariant::ImagePlusFlow), 2024);
  const auto out = net.forward(seeded_input(5, 32, 64, 2024));
  CHECK(output_hash(out.log_depth) == "28c7c67f324dfe84");
}

TEST_CASE("pad to 16 and crop") {
  Tensor<float> img({1, 3, 376, 1241}, 1.0f);
  CropRecord rec;
  const auto padded = pad_to_16(img, &rec);
  CHECK(padded.dim(2) == 384);
  CHECK(padded.dim(3) == 1248);
  CHECK(rec.pad_bottom == 8);
  CHECK(rec.pad_right == 7);
  CHECK(padded.at(0, 2, 380, 10) == 0.0f);
  CHECK(padded.at(0, 2, 10, 1245) == 0.0f);

  Tensor<float> even({1, 3, 96, 320}, 1.0f);
  CropRecord none;
  CHECK(pad_to_16(even, &none).shape() == even.shape());
  CHECK(none.empty());

  const auto r = seeded_input(3, 37, 50, 9);
  CropRecord rr;
  const auto back = crop_padding(pad_to_16(r, &rr), rr);
  REQUIRE(back.shape() == r.shape());
  CHECK(std::memcmp(back.raw(), r.raw(), r.size() * sizeof(float)) == 0);
}

TEST_CASE("assemble input") {
  NetworkSpec single = small_spec(InputVariant::SingleImage);
  single.input_mean = {0.25, 0.5, 0.75};
  Tensor<float> images({1, 3, 4, 8}, 0.5f);
  const auto x = assemble_input<float>(images, {}, single);
  REQUIRE(x.shape() == Shape{1, 3, 4, 8});
  CHECK(x.at(0, 0, 1, 1) == doctest::Approx(0.25));
  CHECK(x.at(0, 2, 1, 1) == doctest::Approx(-0.25));

  NetworkSpec flow = small_spec(InputVariant::ImagePlusFlow);
  FlowField zero(8, 4), half(8, 4);
  for (auto& u : half.u) u = 4.0f;
  const FlowField* zp[] = {&zero};
  const auto z = assemble_input<float>(images, zp, flow);
  REQUIRE(z.shape() == Shape{1, 5, 4, 8});
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t xx = 0; xx < 8; ++xx) {
      CHECK(z.at(0, 3, y, xx) == 0.0f);
      CHECK(z.at(0, 4, y, xx) == 0.0f);
    }
  const FlowField* hp[] = {&half};
  const auto hx = assemble_input<float>(images, hp, flow);
  CHECK(hx.at(0, 3, 2, 5) == 0.5f);
  CHECK_THROWS_AS(assemble_input<float>(images, {}, flow), UsageError);
  FlowField wrong(4, 4);
  const FlowField* wp[] = {&wrong};
  CHECK_THROWS_AS(assemble_input<float>(images, wp, flow), UsageError);
}

TEST_CASE("network gradients agree with finite differences") {
  for (auto v : {InputVariant::SingleImage, InputVariant::ImagePlusFlow}) {
    for (auto loss : {LossKind::LogRmse, LossKind::LinearRmse}) {
      const auto r = oracle::network_gradcheck(v, loss, 31);
      INFO(to_string(v), " ", to_string(loss), " checked ", r.checked, " excluded ", r.excluded);
      CHECK(r.max_rel_error < 1e-6);
      CHECK(r.checked > 10 * r.excluded);
    }
  }
}

TEST_CASE("checkpoint round trip is bit exact") {
  const NetworkSpec s = small_spec(InputVariant::ImagePlusFlow);
  Network<float> net(s, 21);
  std::stringstream buf;
  write_checkpoint(buf, s.to_descriptor(), net.params());
  const std::string bytes = buf.str();
  CHECK(bytes.substr(0, 4) == "DFCK");
  std::istringstream in(bytes);
  Checkpoint ck = read_checkpoint(in);
  CHECK(ck.descriptor == s.to_descriptor());
  Network<float> loaded(parse_descriptor(ck.descriptor), std::move(ck.params));
  const auto x = seeded_input(5, 32, 32, 3);
  CHECK(output_hash(net.forward(x).log_depth) == output_hash(loaded.forward(x).log_depth));

  std::stringstream again;
  write_checkpoint(again, s.to_descriptor(), loaded.params());
  CHECK(again.str() == bytes);
}

TEST_CASE("checkpoint rejects corrupt input") {
  Network<float> net(small_spec(InputVariant::SingleImage), 22);
  std::stringstream buf;
  write_checkpoint(buf, "d", net.params());
  std::string bytes = buf.str();

  std::string magic = bytes;
  magic[0] = 'X';
  std::istringstream a(magic);
  CHECK_THROWS_AS(read_checkpoint(a), DataError);

  std::istringstream b(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_checkpoint(b), DataError);

  std::string version = bytes;
  version[4] = 9;
  std::istringstream c(version);
  CHECK_THROWS_AS(read_checkpoint(c), DataError);

  Checkpoint ck;
  {
    std::istringstream d(bytes);
    ck = read_checkpoint(d);
  }
  NetworkSpec other = small_spec(InputVariant::ImagePlusFlow);
  CHECK_THROWS_AS(Network<float>(other, std::move(ck.params)), DataError);
}
