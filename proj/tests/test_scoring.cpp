#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "psae/adam.hpp"
#include "psae/pseudoanom.hpp"
#include "psae/scoring.hpp"

using namespace psae;
using doctest::Approx;
namespace fs = std::filesystem;

namespace {

Image random_image(Rng& rng, int h, int w) {
    Image img(h, w);
    for (float& v : img.px) v = static_cast<float>(rng.uniform());
    return img;
}

// Independent long-double scalar-loop oracle.
double psnr_oracle(const Image& a, const Image& b) {
    long double sum = 0.0L;
    for (size_t i = 0; i < a.px.size(); ++i) {
        long double d = static_cast<long double>(a.px[i]) - static_cast<long double>(b.px[i]);
        sum += d * d;
    }
    long double mse = sum / static_cast<long double>(a.px.size());
    if (mse < 1e-10L) mse = 1e-10L;
    return static_cast<double>(10.0L * std::log10(1.0L / mse));
}

AutoencoderConfig tiny_config() {
    AutoencoderConfig mc;
    mc.window = 4;
    mc.height = 16;
    mc.width = 16;
    mc.channels = {4, 8};
    return mc;
}

Video constant_video(int64_t frames, int h, int w, float value) {
    Video v;
    v.id = "const";
    v.h = h;
    v.w = w;
    for (int64_t k = 0; k < frames; ++k) {
        Image img(h, w);
        std::fill(img.px.begin(), img.px.end(), value);
        v.frames.push_back(std::move(img));
    }
    return v;
}

// Overfits a small model to reconstruct the constant frame value.
Autoencoder overfit_constant(const AutoencoderConfig& mc, float value, int steps) {
    Rng rng(11);
    Autoencoder model = Autoencoder::seeded(mc, rng);
    FrameSeq seq;
    seq.t = mc.window;
    seq.h = static_cast<int>(mc.height);
    seq.w = static_cast<int>(mc.width);
    seq.px.assign(static_cast<size_t>(mc.window * mc.height * mc.width), value);
    Tensor x = to_batch({&seq});
    AdamState opt;
    AdamConfig acfg;
    acfg.lr = 1e-2;
    for (int i = 0; i < steps; ++i) {
        for (Tensor& p : model.params()) {
            p.set_requires_grad(true);
            p.ensure_grad();
            p.zero_grad();
        }
        Graph g;
        Tensor loss = mse_loss(&g, model.forward(&g, x), x);
        g.backward(loss);
        adam_step(model.params(), opt, acfg);
    }
    return model;
}

}  // namespace

TEST_CASE("psnr matches a scalar-loop oracle within 1e-6 dB") {
    Rng rng(42);
    for (int trial = 0; trial < 50; ++trial) {
        int h = static_cast<int>(rng.uniform_int(1, 24));
        int w = static_cast<int>(rng.uniform_int(1, 24));
        Image a = random_image(rng, h, w);
        Image b = random_image(rng, h, w);
        CHECK(std::abs(psnr(a, b) - psnr_oracle(a, b)) < 1e-6);
    }
}

TEST_CASE("psnr caps at 100 dB and hits textbook values") {
    Image a(8, 8);
    for (int i = 0; i < 64; ++i) a.px[static_cast<size_t>(i)] = static_cast<float>(i) / 64.0f;
    CHECK(psnr(a, a) == Approx(100.0));  // mse floored at 1e-10

    Image b = a;
    for (float& v : b.px) v += 0.5f;  // mse = 0.25 exactly
    CHECK(psnr(a, b) == Approx(10.0 * std::log10(4.0)).epsilon(1e-12));

    Image c = a;
    for (float& v : c.px) v += 0.1f;  // mse ~= 0.01 -> ~20 dB
    CHECK(psnr(a, c) == Approx(20.0).epsilon(1e-6));

    // max_value scales the peak: doubling M adds 10*log10(4) dB
    CHECK(psnr(a, b, 2.0) == Approx(psnr(a, b, 1.0) + 10.0 * std::log10(4.0)));

    Image wrong(4, 4);
    CHECK_THROWS_WITH_AS(psnr(a, wrong), doctest::Contains("shape mismatch"), Error);
}

TEST_CASE("psnr strictly decreases as mse grows") {
    Image base(6, 6);
    double prev = std::numeric_limits<double>::infinity();
    for (int step = 1; step <= 12; ++step) {
        Image noisy(6, 6);
        std::fill(noisy.px.begin(), noisy.px.end(), static_cast<float>(step) * 0.05f);
        double p = psnr(base, noisy);
        CHECK(p < prev);
        prev = p;
    }
}

TEST_CASE("normalize_scores implements inverted min-max with the constant policy") {
    std::vector<double> s = normalize_scores({30.0, 20.0, 25.0});
    REQUIRE(s.size() == 3);
    CHECK(s[0] == Approx(0.0));
    CHECK(s[1] == Approx(1.0));
    CHECK(s[2] == Approx(0.5));

    s = normalize_scores({10.0, 20.0});
    CHECK(s[0] == Approx(1.0));
    CHECK(s[1] == Approx(0.0));

    for (double v : normalize_scores({7.0, 7.0, 7.0, 7.0})) CHECK(v == 0.0);

    CHECK_THROWS_WITH_AS(normalize_scores({}), doctest::Contains("empty"), Error);
}

TEST_CASE("normalize_scores is invariant under positive affine transforms") {
    Rng rng(5);
    std::vector<double> p(40);
    for (double& v : p) v = rng.uniform(5.0, 45.0);
    std::vector<double> s = normalize_scores(p);
    double lo = 1e9, hi = -1e9;
    for (double v : s) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(lo == Approx(0.0));
    CHECK(hi == Approx(1.0));

    for (auto [a, b] : {std::pair{2.5, 0.0}, {1.0, -7.0}, {0.03, 13.0}}) {
        std::vector<double> q = p;
        for (double& v : q) v = a * v + b;
        std::vector<double> s2 = normalize_scores(q);
        for (size_t i = 0; i < s.size(); ++i) CHECK(s2[i] == Approx(s[i]).epsilon(1e-12));
    }
}

TEST_CASE("score_video aligns center frames and inherits scores at the edges") {
    AutoencoderConfig mc = tiny_config();
    Rng rng(9);
    Autoencoder model = Autoencoder::seeded(mc, rng);  // untrained is fine here

    Video v;
    v.id = "vid";
    v.h = 16;
    v.w = 16;
    Rng prng(77);
    for (int k = 0; k < 20; ++k) v.frames.push_back(random_image(prng, 16, 16));

    ScoreSeries s = score_video(model, v);
    CHECK(s.video_id == "vid");
    REQUIRE(s.psnr_db.size() == 20);
    REQUIRE(s.score.size() == 20);
    CHECK(s.center == 2);
    CHECK(s.first_scored == 2);
    CHECK(s.last_scored == 18);  // 20 - 4 + 2
    CHECK(s.scored_from(0) == 2);
    CHECK(s.scored_from(10) == 10);
    CHECK(s.scored_from(19) == 18);
    // leading frames inherit the first computed value, trailing the last
    CHECK(s.psnr_db[0] == s.psnr_db[2]);
    CHECK(s.psnr_db[1] == s.psnr_db[2]);
    CHECK(s.psnr_db[19] == s.psnr_db[18]);
    CHECK(s.psnr_db[1] != s.psnr_db[3]);  // interior values are per-window
    double lo = 1e9, hi = -1e9;
    for (double x : s.score) {
        CHECK(x >= 0.0);
        CHECK(x <= 1.0);
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    CHECK(lo == Approx(0.0));
    CHECK(hi == Approx(1.0));
}

TEST_CASE("score_video batching does not change a single value") {
    AutoencoderConfig mc = tiny_config();
    Rng rng(10);
    Autoencoder model = Autoencoder::seeded(mc, rng);
    Video v;
    v.id = "vid";
    v.h = 16;
    v.w = 16;
    Rng prng(78);
    for (int k = 0; k < 13; ++k) v.frames.push_back(random_image(prng, 16, 16));

    ScoreSeries one = score_video(model, v, 1);
    ScoreSeries many = score_video(model, v, 8);
    CHECK(one.psnr_db == many.psnr_db);
    CHECK(one.score == many.score);
}

TEST_CASE("a video of exactly one window scores constant, hence all zeros") {
    AutoencoderConfig mc = tiny_config();
    Rng rng(12);
    Autoencoder model = Autoencoder::seeded(mc, rng);
    Video v = constant_video(4, 16, 16, 0.4f);
    ScoreSeries s = score_video(model, v);
    REQUIRE(s.psnr_db.size() == 4);
    for (size_t i = 1; i < 4; ++i) CHECK(s.psnr_db[i] == s.psnr_db[0]);
    for (double x : s.score) CHECK(x == 0.0);

    Video tooshort = constant_video(3, 16, 16, 0.4f);
    CHECK_THROWS_WITH_AS(score_video(model, tooshort), doctest::Contains("shorter"), Error);
    Video wrongsize = constant_video(8, 8, 8, 0.4f);
    CHECK_THROWS_WITH_AS(score_video(model, wrongsize), doctest::Contains("model expects"),
                         Error);
    CHECK_THROWS_WITH_AS(score_video(model, v, 0), doctest::Contains("batch_size"), Error);
}

TEST_CASE("a trained model pins the anomalous frame to the worst score") {
    AutoencoderConfig mc = tiny_config();
    Autoencoder model = overfit_constant(mc, 0.35f, 220);

    Video v = constant_video(20, 16, 16, 0.35f);
    Rng nrng(31);
    v.frames[10] = random_image(nrng, 16, 16);  // one wild frame

    ScoreSeries s = score_video(model, v);
    size_t worst = 0;
    for (size_t i = 1; i < s.psnr_db.size(); ++i)
        if (s.psnr_db[i] < s.psnr_db[worst]) worst = i;
    CHECK(worst == 10);
    CHECK(s.score[10] == Approx(1.0));
    // far away from the disturbance the score should be small
    CHECK(s.score[2] < 0.5);
    CHECK(s.score[18] < 0.5);
}

TEST_CASE("heatmap normalizes squared error and zeroes constant error") {
    Image a(5, 7), b(5, 7);
    CHECK(heatmap(a, a).px == std::vector<float>(35, 0.0f));

    b = a;
    b.at(2, 3) += 0.4f;
    Image h = heatmap(a, b);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 7; ++x) CHECK(h.at(y, x) == (y == 2 && x == 3 ? 1.0f : 0.0f));

    // uniform nonzero error is still "nothing stands out"
    Image c = a;
    for (float& v : c.px) v += 0.25f;
    CHECK(heatmap(a, c).px == std::vector<float>(35, 0.0f));

    Image wrong(3, 3);
    CHECK_THROWS_WITH_AS(heatmap(a, wrong), doctest::Contains("shape mismatch"), Error);
}

TEST_CASE("patch pseudo anomalies light up inside the patch region") {
    FrameSeq xn;
    xn.t = 4;
    xn.h = 32;
    xn.w = 32;
    xn.px.assign(4 * 32 * 32, 0.5f);
    Rng rng(21);
    IntruderSource src = IntruderSource::procedural_textures();
    PseudoAnomalySample ps = make_patch_pseudo(xn, src, 0.8, 2, MaskKind::cutmix, rng);

    // Pretend the model reconstructs the normal window perfectly: the error
    // is exactly the injected patch.
    Image heat = heatmap(ps.input.image(1), ps.target.image(1));
    const PatchState& st = ps.patch;
    int64_t ex = st.sw / 2, ey = st.sh / 2;
    float outside_max = 0.0f;
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            bool inside = std::llabs(x - st.cx[1]) <= ex && std::llabs(y - st.cy[1]) <= ey;
            if (!inside) outside_max = std::max(outside_max, heat.at(y, x));
        }
    CHECK(outside_max == 0.0f);
    float inside_sum = 0.0f;
    for (float vpx : heat.px) inside_sum += vpx;
    CHECK(inside_sum > 0.0f);
}

TEST_CASE("score CSV and heatmap files land on disk in the documented shapes") {
    fs::path dir = fs::temp_directory_path() / "psae_scoring_files";
    fs::remove_all(dir);
    fs::create_directories(dir);

    ScoreSeries a;
    a.video_id = "vid_a";
    a.psnr_db = {30.0, 25.0};
    a.score = {0.0, 1.0};
    ScoreSeries b;
    b.video_id = "vid_b";
    b.psnr_db = {12.5};
    b.score = {0.0};
    write_scores_csv(dir / "scores.csv", {a, b});
    std::ifstream f(dir / "scores.csv");
    std::stringstream ss;
    ss << f.rdbuf();
    CHECK(ss.str() ==
          "video_id,frame_idx,psnr_db,score\n"
          "vid_a,0,30,0\n"
          "vid_a,1,25,1\n"
          "vid_b,0,12.5,0\n");

    ScoreSeries broken = a;
    broken.score.pop_back();
    CHECK_THROWS_WITH_AS(write_scores_csv(dir / "broken.csv", {broken}),
                         doctest::Contains("scores"), Error);

    AutoencoderConfig mc = tiny_config();
    Rng rng(14);
    Autoencoder model = Autoencoder::seeded(mc, rng);
    Video v = constant_video(7, 16, 16, 0.3f);
    Rng nrng(15);
    v.frames[3] = random_image(nrng, 16, 16);
    std::vector<Image> heats = video_heatmaps(model, v);
    REQUIRE(heats.size() == 4);  // 7 - 4 + 1 windows
    write_heatmaps(dir / "heat", heats, 2);
    CHECK(fs::exists(dir / "heat" / "heat_000002.pgm"));
    CHECK(fs::exists(dir / "heat" / "heat_000005.pgm"));
    CHECK_FALSE(fs::exists(dir / "heat" / "heat_000006.pgm"));
    Image back = read_pgm(dir / "heat" / "heat_000003.pgm");
    CHECK(back.h == 16);
    CHECK(back.w == 16);
}

TEST_CASE("scoring a loaded video performs no label reads") {
    fs::path dir = fs::temp_directory_path() / "psae_scoring_hygiene";
    fs::remove_all(dir);
    fs::create_directories(dir / "clip");
    for (int k = 0; k < 6; ++k) {
        Image img(16, 16);
        std::fill(img.px.begin(), img.px.end(), 0.2f + 0.1f * static_cast<float>(k % 3));
        char name[32];
        std::snprintf(name, sizeof name, "frame_%06d.pgm", k);
        write_pgm(dir / "clip" / name, img);
    }
    std::ofstream lf(dir / "clip" / "labels.txt");
    for (int k = 0; k < 6; ++k) lf << 0 << "\n";
    lf.close();

    std::vector<AccessEvent> events;
    set_dataset_access_hook([&](const AccessEvent& ev) { events.push_back(ev); });
    Video v = load_video_dir(dir / "clip", LabelPolicy::ignore);
    AutoencoderConfig mc = tiny_config();
    Rng rng(16);
    Autoencoder model = Autoencoder::seeded(mc, rng);
    score_video(model, v);
    set_dataset_access_hook(nullptr);

    CHECK(events.size() == 6);  // the frame loads, nothing else
    for (const AccessEvent& ev : events) CHECK(ev.kind == AccessEvent::Kind::frame);
}
