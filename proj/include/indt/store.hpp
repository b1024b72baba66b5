#pragma once

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "indt/core.hpp"

namespace indt {

// Tabular files: UTF-8, comma separated, one header line, one record per
// line, every line newline-terminated. Coordinates carry exactly two fraction
// digits; scores and derived features use the shortest exact decimal form.

inline constexpr std::string_view kLabelHeader = "image,x_min,y_min,x_max,y_max,class_id";
inline constexpr std::string_view kDetectionHeader = "image,x_min,y_min,x_max,y_max,class_id,score";
inline constexpr std::string_view kDefectHeader =
    "image,x_min,y_min,x_max,y_max,class_id,score,record_id,tile_row,tile_col,area,aspect,created_at";

class CorruptionError : public RuntimeError {
public:
    using RuntimeError::RuntimeError;
};

/// Boxes of one image; an image may have none.
struct ImageBoxes {
    std::string image;
    std::vector<BBox> boxes;

    friend bool operator==(const ImageBoxes&, const ImageBoxes&) = default;
};

namespace csv {

inline std::string fixed2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    std::string s(buf);
    return s == "-0.00" ? "0.00" : s;
}

inline std::string shortest(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline std::string where(const std::string& file, std::size_t line) { return file + ":" + std::to_string(line) + ": "; }

inline double parse_real(std::string_view tok, const std::string& ctx, const char* field) {
    double v = 0.0;
    const auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || r.ec != std::errc{} || r.ptr != tok.data() + tok.size() || !std::isfinite(v))
        throw ValidationError(ctx + "malformed " + field + " '" + std::string(tok) + "'");
    return v;
}

inline std::int64_t parse_int(std::string_view tok, const std::string& ctx, const char* field) {
    std::int64_t v = 0;
    const auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || r.ec != std::errc{} || r.ptr != tok.data() + tok.size())
        throw ValidationError(ctx + "malformed " + field + " '" + std::string(tok) + "'");
    return v;
}

inline void check_image_ref(const std::string& image) {
    require(!image.empty(), "image reference must not be empty");
    require(image.find_first_of(",\"\r\n") == std::string::npos,
            "image reference must not contain commas, quotes or line breaks: " + image);
}

inline void check_box(const BBox& b, int n_classes, const std::string& ctx) {
    if (!(std::isfinite(b.x_min) && std::isfinite(b.y_min) && std::isfinite(b.x_max) && std::isfinite(b.y_max)))
        throw ValidationError(ctx + "non-finite box coordinate");
    if (!(b.x_min < b.x_max)) throw ValidationError(ctx + "box width must be positive");
    if (!(b.y_min < b.y_max)) throw ValidationError(ctx + "box height must be positive");
    if (b.class_id < 0 || b.class_id >= n_classes)
        throw ValidationError(ctx + "unknown class id " + std::to_string(b.class_id));
    if (b.score && !(*b.score >= 0.0 && *b.score <= 1.0)) throw ValidationError(ctx + "score must lie in [0,1]");
}

inline std::string box_fields(const BBox& b) {
    return fixed2(b.x_min) + "," + fixed2(b.y_min) + "," + fixed2(b.x_max) + "," + fixed2(b.y_max) + "," +
           std::to_string(b.class_id);
}

inline BBox parse_box(const std::vector<std::string_view>& f, const std::string& ctx) {
    BBox b;
    b.x_min = parse_real(f[1], ctx, "x_min");
    b.y_min = parse_real(f[2], ctx, "y_min");
    b.x_max = parse_real(f[3], ctx, "x_max");
    b.y_max = parse_real(f[4], ctx, "y_max");
    const auto c = parse_int(f[5], ctx, "class_id");
    if (c < 0 || c > 1'000'000) throw ValidationError(ctx + "unknown class id " + std::string(f[5]));
    b.class_id = static_cast<int>(c);
    return b;
}

/// Splits text into newline-terminated lines; an unterminated tail is
/// returned separately.
struct Lines {
    std::vector<std::string_view> complete;
    std::optional<std::string_view> torn_tail;
};

inline Lines split_lines(std::string_view text) {
    Lines l;
    std::size_t start = 0;
    while (start < text.size()) {
        const auto nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            l.torn_tail = text.substr(start);
            break;
        }
        auto line = text.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        l.complete.push_back(line);
        start = nl + 1;
    }
    return l;
}

inline std::string slurp(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw RuntimeError("cannot open for reading: " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw RuntimeError("cannot open for writing: " + path.string());
    os << text;
    if (!os) throw RuntimeError("write failed: " + path.string());
}

// Shared reader for label and detection files.
inline std::vector<ImageBoxes> parse_box_table(std::string_view text, const std::string& name, std::string_view header,
                                               bool scored, int n_classes) {
    const Lines lines = split_lines(text);
    if (lines.torn_tail) throw ValidationError(where(name, lines.complete.size() + 1) + "line is not newline-terminated");
    if (lines.complete.empty() || lines.complete[0] != header)
        throw ValidationError(where(name, 1) + "expected header '" + std::string(header) + "'");
    const std::size_t n_fields = scored ? 7 : 6;
    std::vector<ImageBoxes> items;
    std::map<std::string, std::size_t, std::less<>> index;
    for (std::size_t ln = 1; ln < lines.complete.size(); ++ln) {
        const std::string ctx = where(name, ln + 1);
        const auto f = split(lines.complete[ln]);
        if (f.size() != n_fields)
            throw ValidationError(ctx + "expected " + std::to_string(n_fields) + " fields, got " +
                                  std::to_string(f.size()));
        if (f[0].empty()) throw ValidationError(ctx + "empty image reference");
        auto it = index.find(f[0]);
        if (it == index.end()) {
            it = index.emplace(std::string(f[0]), items.size()).first;
            items.push_back(ImageBoxes{std::string(f[0]), {}});
        }
        bool blank = true;
        for (std::size_t k = 1; k < n_fields; ++k) blank = blank && f[k].empty();
        if (blank) continue;  // image without boxes
        BBox b = parse_box(f, ctx);
        if (scored) b.score = parse_real(f[6], ctx, "score");
        check_box(b, n_classes, ctx);
        items[it->second].boxes.push_back(b);
    }
    return items;
}

inline std::string format_box_table(const std::vector<ImageBoxes>& items, std::string_view header, bool scored,
                                    int n_classes) {
    std::string out(header);
    out += '\n';
    std::map<std::string, int, std::less<>> seen;
    for (const auto& it : items) {
        check_image_ref(it.image);
        require(seen.emplace(it.image, 0).second, "duplicate image reference: " + it.image);
        if (it.boxes.empty()) {
            out += it.image + (scored ? ",,,,,," : ",,,,,") + "\n";
            continue;
        }
        for (const auto& b : it.boxes) {
            check_box(b, n_classes, it.image + ": ");
            if (scored) require(b.score.has_value(), "detection without score in " + it.image);
            out += it.image + "," + box_fields(b);
            if (scored) out += "," + shortest(*b.score);
            out += '\n';
        }
    }
    return out;
}

}  // namespace csv

inline std::string format_labels(const std::vector<ImageBoxes>& items, int n_classes = 1) {
    return csv::format_box_table(items, kLabelHeader, false, n_classes);
}
inline std::vector<ImageBoxes> parse_labels(std::string_view text, const std::string& name = "labels", int n_classes = 1) {
    return csv::parse_box_table(text, name, kLabelHeader, false, n_classes);
}
inline void write_labels(const std::filesystem::path& path, const std::vector<ImageBoxes>& items, int n_classes = 1) {
    csv::write_text(path, format_labels(items, n_classes));
}
inline std::vector<ImageBoxes> read_labels(const std::filesystem::path& path, int n_classes = 1) {
    return parse_labels(csv::slurp(path), path.string(), n_classes);
}

inline std::string format_detections(const std::vector<ImageBoxes>& items, int n_classes = 1) {
    return csv::format_box_table(items, kDetectionHeader, true, n_classes);
}
inline std::vector<ImageBoxes> parse_detections(std::string_view text, const std::string& name = "detections",
                                                int n_classes = 1) {
    return csv::parse_box_table(text, name, kDetectionHeader, true, n_classes);
}
inline void write_detections(const std::filesystem::path& path, const std::vector<ImageBoxes>& items,
                             int n_classes = 1) {
    csv::write_text(path, format_detections(items, n_classes));
}
inline std::vector<ImageBoxes> read_detections(const std::filesystem::path& path, int n_classes = 1) {
    return parse_detections(csv::slurp(path), path.string(), n_classes);
}

/// One persisted detection.
struct DefectRecord {
    std::int64_t record_id = 0;
    std::string image_ref;
    int tile_row = 0;
    int tile_col = 0;
    BBox box;  // carries the score
    double area = 0.0;
    double aspect = 0.0;  // width / height
    std::string created_at;  // ISO-8601 UTC, e.g. 2024-01-31T12:00:00Z

    friend bool operator==(const DefectRecord&, const DefectRecord&) = default;
};

/// Record with derived features filled in; the id is assigned on append.
inline DefectRecord make_defect_record(std::string image_ref, int tile_row, int tile_col, const BBox& box,
                                       std::string created_at) {
    return DefectRecord{0, std::move(image_ref), tile_row, tile_col, box, box.area(), box.width() / box.height(),
                        std::move(created_at)};
}

inline std::string utc_timestamp(std::chrono::system_clock::time_point t = std::chrono::system_clock::now()) {
    const std::time_t tt = std::chrono::system_clock::to_time_t(t);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline bool is_utc_timestamp(std::string_view s) {
    if (s.size() != 20) return false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        const bool ok = (i == 4 || i == 7) ? c == '-' : i == 10 ? c == 'T' : (i == 13 || i == 16) ? c == ':'
                        : i == 19 ? c == 'Z' : (c >= '0' && c <= '9');
        if (!ok) return false;
    }
    return true;
}

struct DefectDb {
    std::vector<DefectRecord> records;
    std::size_t skipped_torn = 0;  // 1 when an unterminated final line was ignored
    std::int64_t max_id = 0;
    std::size_t valid_bytes = 0;  // length of the newline-terminated prefix
};

namespace csv {

inline void check_record(const DefectRecord& r, const std::string& ctx) {
    check_image_ref(r.image_ref);
    check_box(r.box, 1 << 20, ctx);
    if (!r.box.score) throw ValidationError(ctx + "defect record needs a score");
    if (r.tile_row < 0 || r.tile_col < 0) throw ValidationError(ctx + "tile index must be non-negative");
    if (!(std::isfinite(r.area) && r.area >= 0.0)) throw ValidationError(ctx + "area must be finite and >= 0");
    if (!(std::isfinite(r.aspect) && r.aspect > 0.0)) throw ValidationError(ctx + "aspect must be finite and > 0");
    if (!is_utc_timestamp(r.created_at)) throw ValidationError(ctx + "created_at must be YYYY-MM-DDTHH:MM:SSZ");
}

inline std::string format_record(const DefectRecord& r) {
    return r.image_ref + "," + box_fields(r.box) + "," + shortest(*r.box.score) + "," + std::to_string(r.record_id) +
           "," + std::to_string(r.tile_row) + "," + std::to_string(r.tile_col) + "," + shortest(r.area) + "," +
           shortest(r.aspect) + "," + r.created_at + "\n";
}

inline DefectRecord parse_record(std::string_view line, const std::string& ctx) {
    const auto f = split(line);
    if (f.size() != 13) throw ValidationError(ctx + "expected 13 fields, got " + std::to_string(f.size()));
    DefectRecord r;
    r.image_ref = std::string(f[0]);
    r.box = parse_box(f, ctx);
    r.box.score = parse_real(f[6], ctx, "score");
    r.record_id = parse_int(f[7], ctx, "record_id");
    const auto tr = parse_int(f[8], ctx, "tile_row");
    const auto tc = parse_int(f[9], ctx, "tile_col");
    if (tr < 0 || tc < 0 || tr > 1'000'000 || tc > 1'000'000) throw ValidationError(ctx + "tile index out of range");
    r.tile_row = static_cast<int>(tr);
    r.tile_col = static_cast<int>(tc);
    r.area = parse_real(f[10], ctx, "area");
    r.aspect = parse_real(f[11], ctx, "aspect");
    r.created_at = std::string(f[12]);
    check_record(r, ctx);
    return r;
}

}  // namespace csv

/// Parses database text. A trailing unterminated line is skipped and counted;
/// ids that fail to increase raise CorruptionError.
inline DefectDb parse_defect_db(std::string_view text, const std::string& name = "defects") {
    DefectDb db;
    const csv::Lines lines = csv::split_lines(text);
    if (lines.torn_tail) db.skipped_torn = 1;
    db.valid_bytes = text.size() - (lines.torn_tail ? lines.torn_tail->size() : 0);
    if (lines.complete.empty()) return db;  // nothing but (possibly) a torn header
    if (lines.complete[0] != kDefectHeader)
        throw CorruptionError(csv::where(name, 1) + "expected header '" + std::string(kDefectHeader) + "'");
    for (std::size_t ln = 1; ln < lines.complete.size(); ++ln) {
        const std::string ctx = csv::where(name, ln + 1);
        DefectRecord r;
        try {
            r = csv::parse_record(lines.complete[ln], ctx);
        } catch (const ValidationError& e) {
            throw CorruptionError(e.what());
        }
        if (r.record_id <= db.max_id)
            throw CorruptionError(ctx + "record_id " + std::to_string(r.record_id) + " does not exceed previous id " +
                                  std::to_string(db.max_id));
        db.max_id = r.record_id;
        db.records.push_back(std::move(r));
    }
    return db;
}

inline DefectDb read_defect_db(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) return {};
    return parse_defect_db(csv::slurp(path), path.string());
}

namespace detail {

class FileLock {
public:
    explicit FileLock(const std::filesystem::path& path) {
        fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
        if (fd_ < 0) throw RuntimeError("cannot open lock file: " + path.string());
        if (::flock(fd_, LOCK_EX) != 0) {
            ::close(fd_);
            throw RuntimeError("cannot lock: " + path.string());
        }
    }
    ~FileLock() {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
    FileLock(const FileLock&) = delete;
    FileLock& operator=(const FileLock&) = delete;

private:
    int fd_ = -1;
};

inline void write_all(int fd, std::string_view data, const std::string& name) {
    while (!data.empty()) {
        const auto n = ::write(fd, data.data(), data.size());
        if (n < 0) throw RuntimeError("write failed: " + name);
        data.remove_prefix(static_cast<std::size_t>(n));
    }
}

}  // namespace detail

/// Appends records under an exclusive lock on `<db>.lock`. Ids continue from
/// the stored maximum (the records' own ids are ignored). A torn final line
/// left by an interrupted writer is cut off first. Returns the count appended.
inline std::size_t append_defects(const std::filesystem::path& db_path, const std::vector<DefectRecord>& records) {
    for (const auto& r : records) csv::check_record(r, db_path.string() + ": ");
    std::filesystem::path lock_path = db_path;
    lock_path += ".lock";
    detail::FileLock lock(lock_path);

    const DefectDb db = read_defect_db(db_path);
    const int fd = ::open(db_path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd < 0) throw RuntimeError("cannot open for appending: " + db_path.string());
    try {
        if (::ftruncate(fd, static_cast<off_t>(db.valid_bytes)) != 0)
            throw RuntimeError("cannot truncate torn line: " + db_path.string());
        if (::lseek(fd, 0, SEEK_END) < 0) throw RuntimeError("seek failed: " + db_path.string());
        std::string out;
        if (db.valid_bytes == 0) out = std::string(kDefectHeader) + "\n";
        std::int64_t id = db.max_id;
        for (DefectRecord r : records) {
            r.record_id = ++id;
            out += csv::format_record(r);
        }
        detail::write_all(fd, out, db_path.string());
        if (::fsync(fd) != 0) throw RuntimeError("fsync failed: " + db_path.string());
    } catch (...) {
        ::close(fd);
        throw;
    }
    ::close(fd);
    return records.size();
}

}  // namespace indt
