#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "poisense/jmvae.hpp"
#include "poisense/pipeline.hpp"

using namespace poisense;

namespace {

JmvaeConfig tiny_config() {
    JmvaeConfig cfg;
    cfg.d_x = cfg.d_w = 2;
    cfg.d_z = 1;
    cfg.hidden = 3;
    return cfg;
}

void zero_final_layer(DenseNet& net) {
    auto& l = net.layers.back();
    std::fill(l.weights.begin(), l.weights.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
}

JmvaeModel zero_head_model(const JmvaeConfig& cfg, std::uint64_t seed) {
    RngStream rng(seed);
    JmvaeModel m = init_jmvae(cfg, rng);
    zero_final_layer(m.enc_joint);
    zero_final_layer(m.enc_x);
    zero_final_layer(m.enc_w);
    return m;
}

} // namespace

TEST_CASE("zero-head encoders produce the unit Gaussian") {
    const JmvaeConfig cfg = tiny_config();
    const JmvaeModel m = zero_head_model(cfg, 3);
    const std::vector<double> x{0.2, 0.9}, w{0.4, 0.1};
    for (const DiagGaussian& g :
         {encode_uni(m, Modality::X, x), encode_uni(m, Modality::W, w),
          encode_joint(m, x, w)}) {
        CHECK(g.mu == std::vector<double>{0.0});
        CHECK(g.sigma == std::vector<double>{1.0});
    }
}

TEST_CASE("encoders reject wrong feature lengths") {
    RngStream rng(4);
    const JmvaeModel m = init_jmvae(tiny_config(), rng);
    CHECK_THROWS_AS(encode_uni(m, Modality::X, std::vector<double>{1.0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(encode_joint(m, std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(decode(m, Modality::X, std::vector<double>{1.0, 2.0}),
                    std::invalid_argument);
}

TEST_CASE("zero-weight decoder outputs the zero vector") {
    RngStream rng(5);
    JmvaeModel m = init_jmvae(tiny_config(), rng);
    for (auto& l : m.dec_x.layers) {
        std::fill(l.weights.begin(), l.weights.end(), 0.0);
        std::fill(l.bias.begin(), l.bias.end(), 0.0);
    }
    CHECK(decode(m, Modality::X, std::vector<double>{0.7}) == std::vector<double>{0.0, 0.0});
}

TEST_CASE("loss with zero-head encoders has zero KL terms") {
    const JmvaeConfig cfg = tiny_config();
    const JmvaeModel m = zero_head_model(cfg, 6);
    const std::vector<double> x{0.2, 0.9}, w{0.4, 0.1}, eps{0.3};
    const LossBreakdown lb = jmvae_loss(m, x, w, cfg.alpha_vi, eps);
    CHECK_THAT(lb.kl_prior, Catch::Matchers::WithinAbs(0.0, 1e-14));
    CHECK_THAT(lb.kl_unimodal_x, Catch::Matchers::WithinAbs(0.0, 1e-14));
    CHECK_THAT(lb.kl_unimodal_w, Catch::Matchers::WithinAbs(0.0, 1e-14));
}

TEST_CASE("alpha_vi = 0 reduces the total to the plain two-decoder bound") {
    RngStream rng(7);
    const JmvaeModel m = init_jmvae(tiny_config(), rng);
    const std::vector<double> x{0.2, 0.9}, w{0.4, 0.1}, eps{-0.6};
    const LossBreakdown lb = jmvae_loss(m, x, w, 0.0, eps);
    CHECK_THAT(lb.total,
               Catch::Matchers::WithinAbs(lb.recon_x + lb.recon_w + lb.kl_prior, 1e-14));
}

TEST_CASE("loss decomposition identity holds on random models") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        RngStream rng(seed);
        const JmvaeModel m = init_jmvae(tiny_config(), rng);
        const std::vector<double> x{rng.uniform(), rng.uniform()};
        const std::vector<double> w{rng.uniform(), rng.uniform()};
        const std::vector<double> eps{rng.normal()};
        const double alpha = 0.1;
        const LossBreakdown lb = jmvae_loss(m, x, w, alpha, eps);
        CHECK(lb.total == lb.recon_x + lb.recon_w + lb.kl_prior +
                              alpha * (lb.kl_unimodal_x + lb.kl_unimodal_w));
        CHECK(lb.kl_prior >= 0.0);
        CHECK(lb.kl_unimodal_x >= -1e-12);
        CHECK(lb.kl_unimodal_w >= -1e-12);
    }
}

namespace {

// Flatten every parameter of the five nets for finite differencing.
std::vector<double*> all_params(JmvaeModel& m) {
    std::vector<double*> ps;
    for (DenseNet* net : {&m.enc_joint, &m.enc_x, &m.enc_w, &m.dec_x, &m.dec_w})
        for (auto& l : net->layers) {
            for (auto& v : l.weights) ps.push_back(&v);
            for (auto& v : l.bias) ps.push_back(&v);
        }
    return ps;
}

std::vector<double> all_grads(const JmvaeGrads& g) {
    std::vector<double> out;
    for (const NetGrads* ng : {&g.enc_joint, &g.enc_x, &g.enc_w, &g.dec_x, &g.dec_w})
        for (const auto& l : ng->layers) {
            out.insert(out.end(), l.dweights.begin(), l.dweights.end());
            out.insert(out.end(), l.dbias.begin(), l.dbias.end());
        }
    return out;
}

} // namespace

TEST_CASE("jmvae_loss gradients match finite differences with frozen noise") {
    const JmvaeConfig cfg = tiny_config();
    for (std::uint64_t seed : {11u, 22u, 33u}) {
        RngStream rng(seed);
        JmvaeModel m = init_jmvae(cfg, rng);
        const std::vector<double> x{rng.uniform(), rng.uniform()};
        const std::vector<double> w{rng.uniform(), rng.uniform()};
        const std::vector<double> eps{rng.normal()};
        const double alpha = 0.1;

        JmvaeGrads grads = JmvaeGrads::zeros_like(m);
        jmvae_loss(m, x, w, alpha, eps, &grads);
        const std::vector<double> analytic = all_grads(grads);
        const std::vector<double*> params = all_params(m);
        REQUIRE(analytic.size() == params.size());

        const double h = 1e-5;
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double saved = *params[i];
            *params[i] = saved + h;
            const double up = jmvae_loss(m, x, w, alpha, eps).total;
            *params[i] = saved - h;
            const double down = jmvae_loss(m, x, w, alpha, eps).total;
            *params[i] = saved;
            const double fd = (up - down) / (2.0 * h);
            if (std::abs(analytic[i]) > 1e-6)
                CHECK_THAT(fd, Catch::Matchers::WithinRel(analytic[i], 1e-4));
            else
                CHECK_THAT(fd, Catch::Matchers::WithinAbs(analytic[i], 1e-6));
        }
    }
}

TEST_CASE("train_jmvae with zero epochs returns the initialized model") {
    JmvaeConfig cfg = tiny_config();
    cfg.d_x = cfg.d_w = 4;
    cfg.epochs = 0;
    RngStream data_rng(1);
    WorldConfig wcfg;
    wcfg.d_feat = 4;
    const auto data = generate_dataset(wcfg, 10, data_rng);
    RngStream rng(2);
    const auto [model, history] = train_jmvae(data, cfg, rng);
    CHECK(history.empty());
    model.validate();
}

TEST_CASE("train_jmvae rejects empty or mismatched datasets") {
    RngStream rng(3);
    CHECK_THROWS_AS(train_jmvae({}, tiny_config(), rng), std::invalid_argument);
    std::vector<Sample> bad{{std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}, 1}};
    CHECK_THROWS_AS(train_jmvae(bad, tiny_config(), rng), std::invalid_argument);
}

TEST_CASE("short training on the synthetic task lowers the loss") {
    JmvaeConfig cfg;
    cfg.epochs = 10;
    cfg.dataset_size = 300;
    WorldConfig wcfg;
    RngStream data_rng(11);
    const auto data = generate_dataset(wcfg, cfg.dataset_size, data_rng);
    RngStream rng(12);
    const auto [model, history] = train_jmvae(data, cfg, rng);
    REQUIRE(history.size() == cfg.epochs);
    CHECK(history.back().total < history.front().total);
}

TEST_CASE("training is bit-reproducible given the same seed") {
    JmvaeConfig cfg = tiny_config();
    cfg.d_x = cfg.d_w = 4;
    cfg.epochs = 3;
    WorldConfig wcfg;
    wcfg.d_feat = 4;
    RngStream data_rng(21);
    const auto data = generate_dataset(wcfg, 40, data_rng);
    RngStream r1(5), r2(5);
    const auto [m1, h1] = train_jmvae(data, cfg, r1);
    const auto [m2, h2] = train_jmvae(data, cfg, r2);
    CHECK(m1.enc_joint.layers[0].weights == m2.enc_joint.layers[0].weights);
    CHECK(m1.dec_w.layers[1].bias == m2.dec_w.layers[1].bias);
    REQUIRE(h1.size() == h2.size());
    for (std::size_t i = 0; i < h1.size(); ++i) CHECK(h1[i].total == h2[i].total);
}

TEST_CASE("latent_dump emits three rows per sample with positive sigma") {
    JmvaeConfig cfg = tiny_config();
    cfg.d_x = cfg.d_w = 4;
    RngStream rng(8);
    const JmvaeModel m = init_jmvae(cfg, rng);
    WorldConfig wcfg;
    wcfg.d_feat = 4;
    RngStream data_rng(9);
    const auto data = generate_dataset(wcfg, 17, data_rng);
    const auto rows = latent_dump(m, data);
    REQUIRE(rows.size() == 3 * data.size());
    for (const auto& r : rows) {
        CHECK((r.input_mode == "joint" || r.input_mode == "x-only" || r.input_mode == "w-only"));
        for (double s : r.sigma) CHECK(s > 0.0);
    }
}
