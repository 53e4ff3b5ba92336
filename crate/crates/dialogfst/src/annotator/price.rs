//! Price-mention extraction from utterance text.

use std::sync::OnceLock;

use regex::Regex;

/// Words that mark a preceding number as a quantity rather than a price.
const NON_PRICE_UNITS: &[&str] = &[
    "miles", "mile", "mi", "km", "kilometers", "kilometer", "years", "year", "yrs", "yr",
    "months", "month", "weeks", "week", "days", "day", "hours", "hour", "hrs", "hr", "minutes",
    "minute", "mins", "min", "seconds", "second", "people", "persons", "person", "items", "item",
    "units", "unit", "inches", "inch", "feet", "foot", "ft", "pounds", "lbs", "lb", "kg",
    "kilograms", "kilogram", "grams", "gram", "oz", "ounces", "ounce", "percent", "stars",
    "star", "reviews", "review", "gb", "tb", "mb", "mph", "watts", "watt", "cc", "liters",
    "liter", "gallons", "gallon", "acres", "acre", "sqft", "bedrooms", "bedroom", "bathrooms",
    "bathroom", "seats", "seat", "doors", "door", "owners", "owner", "speeds", "speed", "gears",
    "gear",
];

fn number_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)\$?(\d+(?:,\d{3})*(?:\.\d+)?)(k)?\b").expect("valid price pattern")
    })
}

/// Extract all price mentions from `text`, in order of appearance.
///
/// Handles `$30`, `30 dollars`, `38.4`, and thousands shorthand (`30k` is
/// 30,000). Bare numbers count as prices unless followed by a non-price unit
/// (`45k miles` yields nothing). Unparsable numerals are skipped.
pub fn extract_prices(text: &str) -> Vec<f64> {
    let mut prices = Vec::new();
    for caps in number_pattern().captures_iter(text) {
        let whole = caps.get(0).expect("match");
        let digits = caps.get(1).expect("digits group");
        let thousands = caps.get(2).is_some();

        if followed_by_non_price_unit(&text[whole.end()..]) {
            continue;
        }
        let raw: String = digits.as_str().chars().filter(|c| *c != ',').collect();
        let Ok(mut value) = raw.parse::<f64>() else { continue };
        if thousands {
            value *= 1000.0;
        }
        prices.push(value);
    }
    prices
}

fn followed_by_non_price_unit(rest: &str) -> bool {
    let rest = rest.trim_start();
    if rest.starts_with('%') {
        return true;
    }
    let word: String = rest
        .chars()
        .take_while(|c| c.is_ascii_alphabetic())
        .flat_map(|c| c.to_lowercase())
        .collect();
    !word.is_empty() && NON_PRICE_UNITS.contains(&word.as_str())
}
