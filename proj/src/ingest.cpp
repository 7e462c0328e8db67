#include "flowclass/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "flowclass/errors.hpp"

namespace flowclass {

namespace {

std::string lower_trimmed(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    std::string out;
    out.reserve(e - b);
    for (std::size_t i = b; i < e; ++i)
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(s[i]))));
    return out;
}

bool parse_double(std::string_view s, double& out) {
    const char* b = s.data();
    const char* e = s.data() + s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(*b))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(*(e - 1)))) --e;
    auto [ptr, ec] = std::from_chars(b, e, out);
    return ec == std::errc() && ptr == e && b != e;
}

bool parse_u64(std::string_view s, std::uint64_t& out) {
    const char* b = s.data();
    const char* e = s.data() + s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(*b))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(*(e - 1)))) --e;
    auto [ptr, ec] = std::from_chars(b, e, out);
    return ec == std::errc() && ptr == e && b != e;
}

std::string format_timestamp(double t) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", t);
    return buf;
}

} // namespace

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\r' && i + 1 == line.size()) {
            // tolerate CRLF endings
        } else {
            field.push_back(c);
        }
    }
    fields.push_back(std::move(field));
    return fields;
}

std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

CaptureFile parse_capture(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open capture file: " + path.string());
    return parse_capture(in, path);
}

CaptureFile parse_capture(std::istream& in, std::filesystem::path name) {
    CaptureFile capture;
    capture.path = std::move(name);

    std::string line;
    if (!std::getline(in, line))
        throw FormatError("capture file is empty: " + capture.path.string());

    const std::vector<std::string> header = split_csv_row(line);
    constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::size_t col_time = npos, col_length = npos, col_protocol = npos;
    std::size_t col_src = npos, col_dst = npos;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string key = lower_trimmed(header[i]);
        if (key == "time") col_time = i;
        else if (key == "length") col_length = i;
        else if (key == "protocol") col_protocol = i;
        else if (key == "eth.src") col_src = i;
        else if (key == "eth.dst") col_dst = i;
    }
    const auto require = [&](std::size_t col, const char* what) {
        if (col == npos)
            throw FormatError(std::string("capture header missing required column '") + what +
                              "': " + capture.path.string());
    };
    require(col_time, "time");
    require(col_length, "length");
    require(col_protocol, "protocol");
    require(col_src, "eth.src");
    require(col_dst, "eth.dst");

    std::vector<std::size_t> extra_cols;
    for (std::size_t i = 0; i < header.size(); ++i)
        if (i != col_time && i != col_length && i != col_protocol && i != col_src && i != col_dst)
            extra_cols.push_back(i);

    const std::size_t needed = std::max({col_time, col_length, col_protocol, col_src, col_dst}) + 1;

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        const std::vector<std::string> fields = split_csv_row(line);
        const auto warn = [&](std::string reason) {
            capture.warnings.push_back({line_no, std::move(reason)});
        };
        if (fields.size() < needed) {
            warn("expected at least " + std::to_string(needed) + " fields, got " +
                 std::to_string(fields.size()));
            continue;
        }
        PacketRecord record;
        if (!parse_double(fields[col_time], record.timestamp) || record.timestamp < 0 ||
            !std::isfinite(record.timestamp)) {
            warn("bad time value '" + fields[col_time] + "'");
            continue;
        }
        if (!parse_u64(fields[col_length], record.length)) {
            warn("bad length value '" + fields[col_length] + "'");
            continue;
        }
        const auto src = MacAddress::parse(fields[col_src]);
        if (!src) {
            warn("bad eth.src value '" + fields[col_src] + "'");
            continue;
        }
        const auto dst = MacAddress::parse(fields[col_dst]);
        if (!dst) {
            warn("bad eth.dst value '" + fields[col_dst] + "'");
            continue;
        }
        record.eth_src = *src;
        record.eth_dst = *dst;
        record.protocol = fields[col_protocol];
        std::string info;
        for (std::size_t i : extra_cols) {
            if (i >= fields.size()) continue;
            if (!info.empty()) info.push_back(',');
            info += fields[i];
        }
        record.info = std::move(info);
        capture.records.push_back(std::move(record));
    }
    return capture;
}

void write_capture_csv(const std::vector<PacketRecord>& records, std::ostream& out) {
    out << "time,length,protocol,eth.src,eth.dst,info\n";
    for (const auto& r : records) {
        out << format_timestamp(r.timestamp) << ',' << r.length << ','
            << csv_escape(r.protocol) << ',' << r.eth_src.to_string() << ','
            << r.eth_dst.to_string() << ',' << csv_escape(r.info) << '\n';
    }
}

void write_capture_csv(const std::vector<PacketRecord>& records,
                       const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write capture file: " + path.string());
    write_capture_csv(records, out);
    if (!out) throw IoError("failed while writing capture file: " + path.string());
}

StreamSeparation separate_streams(const CaptureFile& capture,
                                  const std::set<MacAddress>& device_macs) {
    if (device_macs.empty()) throw ParamError("separate_streams: device MAC set is empty");
    StreamSeparation result;
    for (const MacAddress& mac : device_macs) result.streams[mac].device_mac = mac;
    for (const PacketRecord& record : capture.records) {
        const bool src_listed = device_macs.count(record.eth_src) > 0;
        const bool dst_listed =
            record.eth_dst != record.eth_src && device_macs.count(record.eth_dst) > 0;
        if (src_listed) result.streams[record.eth_src].records.push_back(record);
        if (dst_listed) result.streams[record.eth_dst].records.push_back(record);
        if (!src_listed && !dst_listed) ++result.dropped;
    }
    return result;
}

DeviceTable::DeviceTable(std::vector<DeviceEntry> entries) : entries_(std::move(entries)) {
    for (const auto& e : entries_) category_by_mac_[e.mac] = e.category_id;
}

std::set<MacAddress> DeviceTable::macs() const {
    std::set<MacAddress> out;
    for (const auto& e : entries_) out.insert(e.mac);
    return out;
}

std::optional<int> DeviceTable::category_of(const MacAddress& mac) const {
    const auto it = category_by_mac_.find(mac);
    if (it == category_by_mac_.end()) return std::nullopt;
    return it->second;
}

std::vector<int> DeviceTable::category_ids() const {
    std::vector<int> ids;
    for (const auto& e : entries_) ids.push_back(e.category_id);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

DeviceTable load_device_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open device list file: " + path.string());
    std::vector<DeviceEntry> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#' || (line.size() == 1 && line[0] == '\r')) continue;
        const std::vector<std::string> fields = split_csv_row(line);
        if (fields.size() < 3)
            throw FormatError("device list line " + std::to_string(line_no) +
                              ": expected MAC,category_id,device_name");
        const auto mac = MacAddress::parse(fields[0]);
        if (!mac)
            throw FormatError("device list line " + std::to_string(line_no) + ": bad MAC '" +
                              fields[0] + "'");
        std::uint64_t cat = 0;
        if (!parse_u64(fields[1], cat) || cat < 1 || cat > 1000000)
            throw FormatError("device list line " + std::to_string(line_no) +
                              ": bad category id '" + fields[1] + "'");
        entries.push_back({*mac, static_cast<int>(cat), fields[2]});
    }
    return DeviceTable(std::move(entries));
}

void save_device_table(const DeviceTable& table, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write device list file: " + path.string());
    for (const auto& e : table.entries())
        out << e.mac.to_string() << ',' << e.category_id << ',' << csv_escape(e.name) << '\n';
    if (!out) throw IoError("failed while writing device list file: " + path.string());
}

std::filesystem::path stream_file_name(const MacAddress& mac) {
    std::string name = mac.to_string();
    std::replace(name.begin(), name.end(), ':', '-');
    return name + ".csv";
}

void write_stream_dir(const StreamSeparation& separation, const DeviceTable& table,
                      const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create stream directory: " + dir.string());
    for (const auto& [mac, stream] : separation.streams)
        write_capture_csv(stream.records, dir / stream_file_name(mac));
    save_device_table(table, dir / "devices.csv");
}

std::map<MacAddress, DeviceStream> load_stream_dir(const std::filesystem::path& dir,
                                                   const DeviceTable& table) {
    std::map<MacAddress, DeviceStream> streams;
    for (const auto& entry : table.entries()) {
        const std::filesystem::path file = dir / stream_file_name(entry.mac);
        DeviceStream stream;
        stream.device_mac = entry.mac;
        if (std::filesystem::exists(file)) {
            CaptureFile capture = parse_capture(file);
            stream.records = std::move(capture.records);
        }
        streams.emplace(entry.mac, std::move(stream));
    }
    return streams;
}

} // namespace flowclass
