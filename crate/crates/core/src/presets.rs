//! Named delay tables and channel profiles.

use crate::channel::ChannelProfile;
use crate::topology::DelayTable;
use crate::Error;

fn table(rows: &[&[u32]]) -> DelayTable {
    DelayTable::new(rows.iter().map(|r| r.to_vec()).collect()).expect("preset table is valid")
}

/// Top-left `n x n` block of a table.
pub fn submatrix(t: &DelayTable, n: usize) -> Result<DelayTable, Error> {
    if n == 0 || n > t.len() {
        return Err(Error::InvalidTable(format!("cannot take a {n}-link block of a {}-link table", t.len())));
    }
    DelayTable::new(t.rows()[..n].iter().map(|r| r[..n].to_vec()).collect())
}

/// Three-link example with `tau_max = 4`.
pub fn table1() -> DelayTable {
    table(&[&[0, 1, 3], &[2, 0, 4], &[1, 2, 0]])
}

/// Two links whose second row carries the parameter `x`.
pub fn table3(x: u32) -> DelayTable {
    table(&[&[0, 1], &[x, 0]])
}

/// Four-link table used in the elimination walkthrough.
pub fn table4() -> DelayTable {
    table(&[&[0, 4, 1, 1], &[1, 0, 1, 2], &[1, 1, 0, 5], &[3, 1, 1, 0]])
}

/// Three-link table with distinct delays already in descending row order.
pub fn example2() -> DelayTable {
    table(&[&[0, 11, 7], &[9, 0, 8], &[12, 6, 0]])
}

pub fn vsd3() -> DelayTable {
    table(&[&[0, 1, 1], &[1, 0, 1], &[1, 2, 0]])
}

pub fn sd() -> DelayTable {
    table1()
}

pub fn md() -> DelayTable {
    table(&[&[0, 7, 11], &[8, 0, 9], &[12, 6, 0]])
}

pub fn ld() -> DelayTable {
    table(&[&[0, 20, 15], &[24, 0, 17], &[12, 28, 0]])
}

pub fn vld() -> DelayTable {
    table(&[&[0, 78, 36], &[59, 0, 88], &[45, 92, 0]])
}

pub fn vsd10() -> DelayTable {
    table(&[
        &[0, 1, 1, 1, 1, 1, 1, 1, 1, 1],
        &[1, 0, 1, 1, 1, 1, 1, 1, 1, 1],
        &[1, 2, 0, 1, 1, 1, 1, 1, 2, 1],
        &[2, 1, 1, 0, 1, 1, 1, 2, 1, 1],
        &[1, 1, 1, 1, 0, 1, 2, 1, 1, 2],
        &[1, 2, 1, 1, 1, 0, 1, 1, 1, 1],
        &[1, 1, 1, 1, 1, 1, 0, 2, 1, 1],
        &[1, 2, 1, 1, 2, 1, 1, 0, 2, 1],
        &[2, 1, 1, 1, 1, 1, 1, 2, 0, 1],
        &[1, 1, 2, 1, 1, 1, 2, 1, 1, 0],
    ])
}

pub fn md10() -> DelayTable {
    table(&[
        &[0, 7, 11, 6, 5, 3, 9, 7, 11, 4],
        &[8, 0, 9, 7, 3, 2, 5, 9, 2, 8],
        &[12, 6, 0, 11, 3, 4, 11, 7, 2, 9],
        &[9, 11, 2, 0, 5, 7, 2, 1, 10, 5],
        &[2, 5, 11, 3, 0, 7, 8, 9, 10, 4],
        &[1, 9, 2, 4, 8, 0, 11, 6, 5, 2],
        &[12, 1, 3, 5, 9, 11, 0, 7, 9, 1],
        &[7, 7, 1, 2, 11, 8, 4, 0, 11, 8],
        &[4, 1, 4, 4, 9, 12, 11, 7, 0, 1],
        &[1, 1, 12, 4, 7, 1, 1, 9, 12, 0],
    ])
}

/// Four-link delay profiles `DP1` to `DP6`.
pub fn dp(k: u32) -> Result<DelayTable, Error> {
    let t = match k {
        1 => table(&[&[0, 1, 1, 1], &[1, 0, 1, 1], &[1, 1, 0, 1], &[1, 1, 1, 0]]),
        2 => table(&[&[0, 1, 1, 2], &[2, 0, 2, 2], &[2, 2, 0, 1], &[2, 2, 2, 0]]),
        3 => table(&[&[0, 1, 1, 2], &[2, 0, 2, 2], &[2, 2, 0, 1], &[2, 1, 1, 0]]),
        4 => table(&[&[0, 2, 2, 3], &[1, 0, 2, 2], &[2, 2, 0, 2], &[1, 2, 1, 0]]),
        5 => table(&[&[0, 2, 2, 2], &[1, 0, 2, 2], &[2, 3, 0, 3], &[1, 2, 1, 0]]),
        6 => table(&[&[0, 4, 4, 4], &[4, 0, 4, 4], &[4, 4, 0, 4], &[4, 4, 4, 0]]),
        _ => return Err(Error::UnknownPreset(format!("DP{k}"))),
    };
    Ok(t)
}

/// A named preset: either a delay table or a channel profile.
#[derive(Clone, Debug, PartialEq)]
pub enum Preset {
    Delays(DelayTable),
    Channel(ChannelProfile),
}

/// Every preset name; `TABLE3` takes a parameter as `TABLE3(x)`.
///
/// `VSD` and `EXAMPLE2` are also accepted as aliases for `VSD3` and the
/// row-sorted `MD` table.
pub const NAMES: [&str; 21] = [
    "VSD3",
    "SD",
    "MD",
    "LD",
    "VLD",
    "VSD10",
    "MD10",
    "DP1",
    "DP2",
    "DP3",
    "DP4",
    "DP5",
    "DP6",
    "TABLE1",
    "TABLE3(x)",
    "TABLE4",
    "VSVC",
    "SVC",
    "MVC",
    "FVC",
    "VFVC",
];

/// Looks up a preset by name, case-insensitively.
pub fn preset(name: &str) -> Result<Preset, Error> {
    let upper = name.trim().to_ascii_uppercase();
    if let Ok(p) = upper.parse::<ChannelProfile>() {
        return Ok(Preset::Channel(p));
    }
    if let Some(arg) = upper.strip_prefix("TABLE3(").and_then(|s| s.strip_suffix(')')) {
        let x = arg.trim().parse().map_err(|_| Error::UnknownPreset(name.to_string()))?;
        return Ok(Preset::Delays(table3(x)));
    }
    let t = match upper.as_str() {
        "VSD" | "VSD3" => vsd3(),
        "SD" => sd(),
        "MD" => md(),
        "LD" => ld(),
        "VLD" => vld(),
        "VSD10" => vsd10(),
        "MD10" => md10(),
        "TABLE1" => table1(),
        "TABLE4" => table4(),
        "EXAMPLE2" => example2(),
        s => match s.strip_prefix("DP").and_then(|k| k.parse().ok()) {
            Some(k) => dp(k)?,
            None => return Err(Error::UnknownPreset(name.to_string())),
        },
    };
    Ok(Preset::Delays(t))
}

/// Looks up a delay-table preset.
pub fn delay_preset(name: &str) -> Result<DelayTable, Error> {
    match preset(name)? {
        Preset::Delays(t) => Ok(t),
        Preset::Channel(_) => Err(Error::UnknownPreset(format!("{name} is a channel profile"))),
    }
}
