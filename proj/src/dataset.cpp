#include "psae/dataset.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include "psae/toml.hpp"

namespace psae {

namespace {
std::function<void(const AccessEvent&)> g_access_hook;

void emit_access(AccessEvent::Kind kind, const std::filesystem::path& path) {
    if (g_access_hook) g_access_hook(AccessEvent{kind, path.string()});
}

std::string frame_name(int64_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%06lld.pgm", static_cast<long long>(i));
    return buf;
}
}  // namespace

void set_dataset_access_hook(std::function<void(const AccessEvent&)> hook) {
    g_access_hook = std::move(hook);
}

Video load_video_dir(const std::filesystem::path& dir, LabelPolicy policy) {
    if (!std::filesystem::is_directory(dir))
        throw Error(concat("video directory not found: ", dir.string()));
    Video v;
    v.id = dir.filename().string();
    for (int64_t i = 0;; ++i) {
        const auto path = dir / frame_name(i);
        if (!std::filesystem::exists(path)) break;
        emit_access(AccessEvent::Kind::frame, path);
        Image img = read_pgm(path);
        if (i == 0) {
            v.h = img.h;
            v.w = img.w;
        } else if (img.h != v.h || img.w != v.w) {
            throw Error(concat(path.string(), ": frame size ", img.w, "x", img.h,
                               " differs from first frame ", v.w, "x", v.h));
        }
        v.frames.push_back(std::move(img));
    }
    if (v.frames.empty()) throw Error(concat("no frame_000000.pgm in ", dir.string()));

    if (policy == LabelPolicy::ignore) return v;
    const auto label_path = dir / "labels.txt";
    if (!std::filesystem::exists(label_path)) {
        if (policy == LabelPolicy::require)
            throw Error(concat("missing labels.txt in ", dir.string()));
        return v;
    }
    emit_access(AccessEvent::Kind::labels, label_path);
    std::ifstream in(label_path);
    if (!in) throw Error(concat("cannot open ", label_path.string()));
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty()) continue;
        if (line != "0" && line != "1")
            throw Error(concat(label_path.string(), ":", lineno, ": expected 0 or 1, got '", line,
                               "'"));
        v.labels.push_back(line == "1" ? 1 : 0);
    }
    if (v.labels.size() != v.frames.size())
        throw Error(concat(label_path.string(), ": ", v.labels.size(), " labels for ",
                           v.frames.size(), " frames"));
    v.has_labels = true;
    return v;
}

Image FrameSeq::image(int64_t i) const {
    Image img(h, w);
    std::memcpy(img.px.data(), frame(i), sizeof(float) * static_cast<size_t>(h) * w);
    return img;
}

Window sample_window(const Video& video, int64_t n, int64_t t) {
    if (t < 1) throw Error(concat("sample_window: window length ", t, " < 1"));
    if (n < 0 || n + t > video.frame_count())
        throw Error(concat("sample_window: [", n, ", ", n + t, ") out of range for video '",
                           video.id, "' with ", video.frame_count(), " frames"));
    Window w;
    w.start = n;
    w.length = t;
    w.frames.t = t;
    w.frames.h = video.h;
    w.frames.w = video.w;
    w.frames.px.resize(static_cast<size_t>(t) * video.h * video.w);
    for (int64_t i = 0; i < t; ++i)
        std::memcpy(w.frames.frame(i), video.frames[static_cast<size_t>(n + i)].px.data(),
                    sizeof(float) * static_cast<size_t>(video.h) * video.w);
    return w;
}

Tensor to_batch(const std::vector<const FrameSeq*>& seqs) {
    if (seqs.empty()) throw Error("to_batch: empty batch");
    const FrameSeq& first = *seqs[0];
    for (const FrameSeq* s : seqs)
        if (s->t != first.t || s->h != first.h || s->w != first.w)
            throw Error("to_batch: mismatched window shapes");
    const int64_t n = static_cast<int64_t>(seqs.size());
    Tensor out = Tensor::zeros({n, first.t, 1, first.h, first.w});
    const size_t per = static_cast<size_t>(first.t) * first.h * first.w;
    for (int64_t i = 0; i < n; ++i)
        std::memcpy(out.data() + static_cast<size_t>(i) * per, seqs[static_cast<size_t>(i)]->px.data(),
                    sizeof(float) * per);
    return out;
}

// ---------------------------------------------------------------- manifest

const char* to_string(Role r) { return r == Role::train ? "train" : "test"; }

const char* to_string(AnomalyKind k) {
    switch (k) {
        case AnomalyKind::none: return "none";
        case AnomalyKind::appearance: return "appearance";
        case AnomalyKind::motion: return "motion";
    }
    return "?";
}

Role parse_role(const std::string& s) {
    if (s == "train") return Role::train;
    if (s == "test") return Role::test;
    throw Error(concat("unknown role '", s, "' (expected train|test)"));
}

AnomalyKind parse_anomaly_kind(const std::string& s) {
    if (s == "none") return AnomalyKind::none;
    if (s == "appearance") return AnomalyKind::appearance;
    if (s == "motion") return AnomalyKind::motion;
    throw Error(concat("unknown anomaly kind '", s, "' (expected none|appearance|motion)"));
}

Manifest load_manifest(const std::filesystem::path& root) {
    const auto path = root / "manifest.toml";
    toml::Table t = toml::parse_file(path);
    t.expect_only({}, {"video"});
    Manifest m;
    if (!t.has_table_array("video")) throw Error(concat(path.string(), ": no [[video]] entries"));
    for (const auto& entry : t.table_array("video")) {
        entry.expect_only({"dir", "role", "anomaly"}, {});
        ManifestEntry e;
        e.dir = entry.get_string("dir");
        e.role = parse_role(entry.get_string("role"));
        e.anomaly = parse_anomaly_kind(entry.get_string_or("anomaly", "none"));
        if (e.role == Role::train && e.anomaly != AnomalyKind::none)
            throw Error(concat(path.string(), ": train video '", e.dir,
                               "' marked anomalous — training data must be normal only"));
        m.entries.push_back(std::move(e));
    }
    return m;
}

void save_manifest(const std::filesystem::path& root, const Manifest& m) {
    toml::Table t;
    for (const auto& e : m.entries) {
        toml::Table& row = t.append_table("video");
        row.set("dir", toml::Value::str(e.dir));
        row.set("role", toml::Value::str(to_string(e.role)));
        row.set("anomaly", toml::Value::str(to_string(e.anomaly)));
    }
    toml::write_file(root / "manifest.toml", t);
}

std::vector<Video> load_videos(const std::filesystem::path& root, const Manifest& m, Role role,
                               LabelPolicy policy) {
    std::vector<Video> out;
    for (const auto& e : m.entries)
        if (e.role == role) out.push_back(load_video_dir(root / e.dir, policy));
    return out;
}

}  // namespace psae
