#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "canon.hpp"
#include "retrieval.hpp"

// Fixed vocabulary of the synthetic labour market: titles, employers, cities,
// person names and the abbreviation rules used to corrupt and restore strings.
namespace incv::world {

struct TitleSpec {
    std::string_view name;
    double weight;
};

/// Ordered from lowest to highest typical pay.
inline constexpr std::array<TitleSpec, 36> kTitles = {{
    {"Cashier", 5},
    {"Sales Associate", 6},
    {"Cook", 4},
    {"Customer Service Representative", 6},
    {"Warehouse Associate", 5},
    {"Administrative Assistant", 6},
    {"Mail Carrier", 3},
    {"Truck Driver", 5},
    {"Medical Technologist", 3},
    {"Teacher", 5},
    {"Bookkeeper", 3},
    {"Electrician", 3},
    {"Maintenance Technician", 4},
    {"Account Representative", 4},
    {"Accountant", 5},
    {"Registered Nurse", 6},
    {"Marketing Specialist", 4},
    {"Graphic Designer", 2},
    {"Human Resources Specialist", 3},
    {"Financial Analyst", 4},
    {"Business Analyst", 4},
    {"Mechanical Engineer", 3},
    {"Civil Engineer", 2},
    {"Account Manager", 4},
    {"Project Manager", 4},
    {"Operations Manager", 3},
    {"Software Engineer", 6},
    {"Data Scientist", 2},
    {"Pharmacist", 2},
    {"Senior Accountant", 2},
    {"Senior Software Engineer", 3},
    {"Senior Manager", 3},
    {"Product Manager", 2},
    {"Engineering Manager", 2},
    {"Director of Operations", 1.5},
    {"Vice President", 1},
}};

struct EmployerSpec {
    std::string name;
    std::string industry;
};

namespace detail {

inline constexpr std::array<std::string_view, 20> kPrefixes = {
    "Apex",    "Summit",  "Blue River", "Northwind", "Pioneer",  "Harbor",  "Granite",
    "Silverline", "Redwood", "Keystone", "Meridian", "Crescent", "Evergreen", "Ironwood",
    "Lakeside", "Beacon",  "Horizon",   "Cobalt",    "Liberty",  "Orion"};

inline constexpr std::array<std::string_view, 5> kSuffixes = {"Corporation", "Inc.", "Company", "LLC", "Group"};

struct IndustryCores {
    std::string_view industry;
    std::array<std::string_view, 4> cores;
    bool suffix;
};

inline constexpr std::array<IndustryCores, 11> kCores = {{
    {"Technology", {"Software", "Systems", "Analytics", "Networks"}, true},
    {"Finance", {"Capital", "Financial", "Bank", "Insurance"}, true},
    {"Healthcare", {"Health", "Medical Center", "Hospital", "Care"}, false},
    {"Manufacturing", {"Manufacturing", "Industries", "Motors", "Materials"}, true},
    {"Retail", {"Stores", "Market", "Outfitters", "Foods"}, true},
    {"Education", {"University", "College", "Academy", "School District"}, false},
    {"Travel", {"Airlines", "Travel", "Cruises", "Rail"}, true},
    {"Energy", {"Energy", "Power", "Oil", "Solar"}, true},
    {"Logistics", {"Logistics", "Freight", "Shipping", "Transport"}, true},
    {"Hospitality", {"Hotels", "Resorts", "Restaurants", "Hospitality"}, true},
    {"Consulting", {"Consulting", "Advisors", "Partners", "Strategy"}, true},
}};

inline constexpr std::array<std::string_view, 8> kGovernment = {
    "United States Postal Service", "Department of Agriculture", "Department of Homeland Security",
    "Department of Veterans Affairs", "Internal Revenue Service", "State Department of Transportation",
    "City of Springfield", "County Public Works"};

}  // namespace detail

inline constexpr std::size_t kEmployersPerIndustry = 10;

/// Employers in a fixed order: ten generated names per commercial industry,
/// then government bodies, then a few named firms.
inline const std::vector<EmployerSpec>& employers() {
    static const std::vector<EmployerSpec> list = [] {
        std::vector<EmployerSpec> out;
        for (std::size_t i = 0; i < detail::kCores.size(); ++i) {
            const auto& ic = detail::kCores[i];
            for (std::size_t j = 0; j < kEmployersPerIndustry; ++j) {
                std::string name(detail::kPrefixes[(i * 7 + j * 3) % detail::kPrefixes.size()]);
                name += " ";
                name += ic.cores[j % ic.cores.size()];
                if (ic.suffix) {
                    name += " ";
                    name += detail::kSuffixes[(i + j) % detail::kSuffixes.size()];
                }
                out.push_back({name, std::string(ic.industry)});
            }
        }
        for (auto g : detail::kGovernment) out.push_back({std::string(g), "Government"});
        out.push_back({"General Electric", "Manufacturing"});
        out.push_back({"XYZ Company", "Technology"});
        return out;
    }();
    return list;
}

struct CitySpec {
    std::string_view city;
    std::string_view county;
    std::string_view state;
    std::string_view zip3;
    double weight;
};

/// Ordered from lowest to highest local pay level.
inline constexpr std::array<CitySpec, 40> kCities = {{
    {"Sells", "Pima", "AZ", "856", 0.5},
    {"Ames", "Story", "IA", "500", 0.6},
    {"Birmingham", "Jefferson", "AL", "352", 1},
    {"Memphis", "Shelby", "TN", "381", 1},
    {"Oklahoma City", "Oklahoma", "OK", "731", 1},
    {"Albuquerque", "Bernalillo", "NM", "871", 1},
    {"Louisville", "Jefferson", "KY", "402", 1},
    {"New Orleans", "Orleans", "LA", "701", 1},
    {"Boise", "Ada", "ID", "837", 0.8},
    {"Des Moines", "Polk", "IA", "503", 0.8},
    {"Omaha", "Douglas", "NE", "681", 0.9},
    {"Indianapolis", "Marion", "IN", "462", 1.2},
    {"Milwaukee", "Milwaukee", "WI", "532", 1},
    {"Cleveland", "Cuyahoga", "OH", "441", 1},
    {"Detroit", "Wayne", "MI", "482", 1.2},
    {"Kansas City", "Jackson", "MO", "641", 1},
    {"St. Louis", "St. Louis", "MO", "631", 1},
    {"Columbus", "Franklin", "OH", "432", 1.2},
    {"Nashville", "Davidson", "TN", "372", 1.1},
    {"Las Vegas", "Clark", "NV", "891", 1.1},
    {"Orlando", "Orange", "FL", "328", 1.1},
    {"Phoenix", "Maricopa", "AZ", "850", 1.5},
    {"Charlotte", "Mecklenburg", "NC", "282", 1.2},
    {"Pittsburgh", "Allegheny", "PA", "152", 1},
    {"Salt Lake City", "Salt Lake", "UT", "841", 0.9},
    {"Raleigh", "Wake", "NC", "276", 1},
    {"Miami", "Miami-Dade", "FL", "331", 1.4},
    {"Atlanta", "Fulton", "GA", "303", 1.6},
    {"Houston", "Harris", "TX", "770", 2},
    {"Dallas", "Dallas", "TX", "752", 1.8},
    {"Philadelphia", "Philadelphia", "PA", "191", 1.6},
    {"Minneapolis", "Hennepin", "MN", "554", 1.1},
    {"Denver", "Denver", "CO", "802", 1.3},
    {"Austin", "Travis", "TX", "787", 1.3},
    {"Chicago", "Cook", "IL", "606", 2.2},
    {"Los Angeles", "Los Angeles", "CA", "900", 2.5},
    {"Seattle", "King", "WA", "981", 1.6},
    {"Boston", "Suffolk", "MA", "021", 1.5},
    {"New York", "New York", "NY", "100", 3},
    {"San Francisco", "San Francisco", "CA", "941", 1.8},
}};

inline constexpr std::array<std::string_view, 48> kFirstNames = {
    "James",  "Mary",    "John",    "Patricia", "Robert", "Jennifer", "Michael", "Linda",  "William", "Elizabeth",
    "David",  "Barbara", "Richard", "Susan",    "Joseph", "Jessica",  "Thomas",  "Sarah",  "Charles", "Karen",
    "Daniel", "Nancy",   "Matthew", "Lisa",     "Anthony", "Betty",   "Mark",    "Sandra", "Steven",  "Ashley",
    "Paul",   "Emily",   "Andrew",  "Donna",    "Joshua", "Michelle", "Kevin",   "Carol",  "Brian",   "Amanda",
    "George", "Melissa", "Harry",   "Deborah",  "Edward", "Laura",    "Ryan",    "Maria"};

inline constexpr std::array<std::string_view, 30> kMiddleNames = {
    "Ryan",  "Lee",   "Ann",    "Marie", "James",  "Lynn",  "Scott", "Rose",  "Allen", "Jean",
    "Ray",   "Grace", "Thomas", "Mae",   "Edward", "Louise", "Dean", "Kay",   "Wayne", "Jo",
    "Alan",  "Faye",  "Paul",   "Beth",  "Joseph", "Nicole", "Eugene", "Dawn", "Carl", "Irene"};

inline constexpr std::array<std::string_view, 64> kLastNames = {
    "Smith",    "Johnson", "Williams", "Brown",   "Jones",    "Garcia",  "Miller",   "Davis",  "Rodriguez",
    "Martinez", "Hernandez", "Lopez",  "Gonzalez", "Wilson",  "Anderson", "Thomas",  "Taylor", "Moore",
    "Jackson",  "Martin",  "Lee",      "Perez",   "Thompson", "White",   "Harris",   "Sanchez", "Clark",
    "Ramirez",  "Lewis",   "Robinson", "Walker",  "Young",    "Allen",   "King",     "Wright", "Scott",
    "Torres",   "Nguyen",  "Hill",     "Flores",  "Green",    "Adams",   "Nelson",   "Baker",  "Hall",
    "Rivera",   "Campbell", "Mitchell", "Carter", "Roberts",  "Bond",    "Potter",   "Turner", "Phillips",
    "Evans",    "Collins", "Stewart",  "Morris",  "Murphy",   "Cook",    "Rogers",   "Reed",   "Bailey",
    "Kelly"};

inline constexpr std::array<std::string_view, 16> kStreetNames = {
    "Oak", "Maple", "Pine", "Cedar", "Elm", "Washington", "Lake", "Hill",
    "Main", "Park", "Walnut", "Sunset", "River", "Church", "Highland", "Jackson"};

inline constexpr std::array<std::string_view, 4> kStreetKinds = {"St", "Ave", "Blvd", "Rd"};

struct Abbreviation {
    std::string_view full;
    std::array<std::string_view, 2> forms;  // empty string = unused
};

/// Token abbreviations seen in noisy input; each form maps back to `full`.
inline constexpr std::array<Abbreviation, 12> kTitleAbbreviations = {{
    {"Senior", {"Sr.", "Snr."}},
    {"Manager", {"Mgr", "Mgr."}},
    {"Account", {"Acc.", "Acct"}},
    {"Engineer", {"Engr", ""}},
    {"Assistant", {"Asst.", ""}},
    {"Associate", {"Assoc.", ""}},
    {"Representative", {"Rep", "Rep."}},
    {"Administrative", {"Admin", ""}},
    {"Director", {"Dir.", ""}},
    {"Specialist", {"Spec.", ""}},
    {"Technician", {"Techn.", ""}},
    {"Operations", {"Ops", ""}},
}};

inline constexpr std::array<Abbreviation, 8> kEmployerAbbreviations = {{
    {"Corporation", {"Corp.", "Corp"}},
    {"Company", {"Co.", "Co"}},
    {"Incorporated", {"Incorp.", ""}},
    {"Manufacturing", {"Mfg", "Mfg."}},
    {"Department", {"Dept.", "Dept"}},
    {"Financial", {"Finl", ""}},
    {"International", {"Intl", ""}},
    {"Systems", {"Sys.", ""}},
}};

struct WholeAlias {
    std::string_view raw;
    std::string_view canonical;
};

/// Whole-string employer and title aliases, including the printed canonicalization examples.
inline constexpr std::array<WholeAlias, 9> kEmployerAliases = {{
    {"U.S.P.S", "United States Postal Service"},
    {"U.S. Postal Service", "United States Postal Service"},
    {"USPS", "United States Postal Service"},
    {"GE", "General Electric"},
    {"G.E", "General Electric"},
    {"IRS", "Internal Revenue Service"},
    {"VA", "Department of Veterans Affairs"},
    {"USDA", "Department of Agriculture"},
    {"DHS", "Department of Homeland Security"},
}};

inline constexpr std::array<WholeAlias, 3> kTitleAliases = {{
    {"VP", "Vice President"},
    {"RN", "Registered Nurse"},
    {"HR Specialist", "Human Resources Specialist"},
}};

/// Default alias table: every canonical employer and title keyed by itself (so
/// case and punctuation variants resolve), the whole-string aliases, and the
/// token abbreviations.
inline canon::AliasTable default_alias_table() {
    canon::AliasTable t;
    for (const auto& a : kTitleAbbreviations)
        for (auto f : a.forms)
            if (!f.empty()) t.add_token(canon::Kind::title, f, std::string(a.full));
    for (const auto& a : kEmployerAbbreviations)
        for (auto f : a.forms)
            if (!f.empty()) t.add_token(canon::Kind::employer, f, std::string(a.full));
    for (const auto& e : employers()) t.add_entry(canon::Kind::employer, e.name, e.name);
    for (const auto& ti : kTitles) t.add_entry(canon::Kind::title, ti.name, std::string(ti.name));
    for (const auto& a : kEmployerAliases) t.add_entry(canon::Kind::employer, a.raw, std::string(a.canonical));
    for (const auto& a : kTitleAliases) t.add_entry(canon::Kind::title, a.raw, std::string(a.canonical));
    t.validate();
    return t;
}

inline std::string default_industry_csv() {
    std::string out = "employer,industry\n";
    for (const auto& e : employers()) out += csv::quote(e.name) + "," + e.industry + "\n";
    return out;
}

inline retrieval::IndustryTable default_industry_table() { return retrieval::IndustryTable::parse_csv(default_industry_csv()); }

}  // namespace incv::world
