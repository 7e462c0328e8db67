#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "flowclass/traffic_model.hpp"

namespace flowclass {

struct ParseWarning {
    std::size_t line = 0;  // 1-based file line number
    std::string reason;
};

// A parsed capture export. Records keep file order; every malformed data row
// is skipped and accounted for in `warnings`.
struct CaptureFile {
    std::filesystem::path path;
    std::vector<PacketRecord> records;
    std::vector<ParseWarning> warnings;
};

// Delimited text with a header row naming at least
// {time, length, protocol, eth.src, eth.dst} (case-insensitive, any order).
// Values of any extra columns are joined into PacketRecord::info.
// Throws IoError if the file cannot be read and FormatError when the header
// lacks a required column.
CaptureFile parse_capture(const std::filesystem::path& path);
CaptureFile parse_capture(std::istream& in, std::filesystem::path name = {});

// Writes records with the canonical header time,length,protocol,eth.src,
// eth.dst,info. Timestamps use 17 significant digits so a reparse yields
// identical records.
void write_capture_csv(const std::vector<PacketRecord>& records, std::ostream& out);
void write_capture_csv(const std::vector<PacketRecord>& records, const std::filesystem::path& path);

struct StreamSeparation {
    std::map<MacAddress, DeviceStream> streams;  // one entry per listed MAC
    std::size_t dropped = 0;                     // records matching no listed MAC
};

// Routes each record to the stream of every listed MAC it matches (a record
// between two listed devices lands in both streams); unmatched records are
// dropped and counted. Original order is preserved inside each stream.
StreamSeparation separate_streams(const CaptureFile& capture,
                                  const std::set<MacAddress>& device_macs);

// Device list file: one `MAC,category_id,device_name` per line, mirroring the
// label table the evaluation protocol needs.
struct DeviceEntry {
    MacAddress mac;
    int category_id = 0;
    std::string name;

    bool operator==(const DeviceEntry&) const = default;
};

class DeviceTable {
public:
    DeviceTable() = default;
    explicit DeviceTable(std::vector<DeviceEntry> entries);

    const std::vector<DeviceEntry>& entries() const { return entries_; }
    std::set<MacAddress> macs() const;
    std::optional<int> category_of(const MacAddress& mac) const;
    std::vector<int> category_ids() const;  // sorted, unique
    bool empty() const { return entries_.empty(); }

private:
    std::vector<DeviceEntry> entries_;           // file order
    std::map<MacAddress, int> category_by_mac_;
};

DeviceTable load_device_table(const std::filesystem::path& path);
void save_device_table(const DeviceTable& table, const std::filesystem::path& path);

// A stream directory holds one capture-format CSV per device MAC (named
// <mac-with-dashes>.csv) plus a devices.csv manifest with the label table.
void write_stream_dir(const StreamSeparation& separation, const DeviceTable& table,
                      const std::filesystem::path& dir);
std::map<MacAddress, DeviceStream> load_stream_dir(const std::filesystem::path& dir,
                                                   const DeviceTable& table);
std::filesystem::path stream_file_name(const MacAddress& mac);

// Minimal CSV helpers shared by the file formats (RFC-style double quotes).
std::vector<std::string> split_csv_row(const std::string& line);
std::string csv_escape(std::string_view field);

} // namespace flowclass
