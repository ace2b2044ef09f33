// Copyright 2026 The ProFTAP Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PROFTAP_RECORDS_H_
#define PROFTAP_RECORDS_H_

// Plain-text artifact formats shared by the pipeline stages.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "proftap/corpus.h"
#include "proftap/judging.h"

namespace proftap {

// "2026-10-18T09:30:00.250Z"
std::string FormatTimestamp(std::int64_t unix_ms);
// Accepts the format above, with or without fractional seconds.
std::int64_t ParseTimestamp(std::string_view text);

// Shortest decimal that round-trips to the same double ("0.37", "1").
std::string FormatDouble(double value);

nlohmann::json PoemToJson(const Poem& poem);
Poem PoemFromJson(const nlohmann::json& json);

void WritePoemsJsonl(const std::filesystem::path& path,
                     std::span<const Poem> poems);
std::vector<Poem> ReadPoemsJsonl(const std::filesystem::path& path);

// judge_id,poem_id,probability,submitted_at
void WriteRatingsCsv(std::ostream& out, std::span<const RatingRecord> ratings);
std::string RatingsToCsv(std::span<const RatingRecord> ratings);
std::vector<RatingRecord> ReadRatingsCsv(const std::filesystem::path& path);
std::vector<RatingRecord> ParseRatingsCsv(std::istream& in);

// Writes through a temporary file and renames it into place.
void WriteFileAtomic(const std::filesystem::path& path,
                     std::string_view contents);
std::string ReadFile(const std::filesystem::path& path);

nlohmann::json ReadJsonFile(const std::filesystem::path& path);

}  // namespace proftap

#endif  // PROFTAP_RECORDS_H_
