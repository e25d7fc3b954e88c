//! A1-style cell addresses.

use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

/// Largest column index accepted (`XFD`, the usual spreadsheet limit).
pub const MAX_COLUMN: u32 = 16_384;
pub const MAX_ROW: u32 = 1_048_576;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AddressError {
    #[error("invalid cell address `{0}`")]
    Invalid(String),
    #[error("cell address `{0}` is out of range")]
    OutOfRange(String),
}

/// A 1-based grid position, optionally qualified with a sheet name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellAddress {
    pub sheet: Option<String>,
    pub column: u32,
    pub row: u32,
}

impl CellAddress {
    pub fn new(column: u32, row: u32) -> Self {
        Self { sheet: None, column, row }
    }

    pub fn on_sheet(sheet: impl Into<String>, column: u32, row: u32) -> Self {
        Self { sheet: Some(sheet.into()), column, row }
    }

    /// Same grid position without the sheet qualifier.
    pub fn local(&self) -> Self {
        Self::new(self.column, self.row)
    }

    pub fn parse(s: &str) -> Result<Self, AddressError> {
        let (sheet, rest) = split_sheet(s)?;
        let (column, row, consumed) =
            scan_cell(rest).ok_or_else(|| AddressError::Invalid(s.into()))?;
        if consumed != rest.len() {
            return Err(AddressError::Invalid(s.into()));
        }
        if column == 0 || row == 0 || column > MAX_COLUMN || row > MAX_ROW {
            return Err(AddressError::OutOfRange(s.into()));
        }
        Ok(Self { sheet, column, row })
    }
}

impl FromStr for CellAddress {
    type Err = AddressError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl fmt::Display for CellAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(sheet) = &self.sheet {
            write_sheet_prefix(f, sheet)?;
        }
        write!(f, "{}{}", ColumnLetters(self.column), self.row)
    }
}

pub(crate) fn write_sheet_prefix(f: &mut fmt::Formatter<'_>, sheet: &str) -> fmt::Result {
    if needs_quotes(sheet) {
        write!(f, "'{sheet}'!")
    } else {
        write!(f, "{sheet}!")
    }
}

fn needs_quotes(sheet: &str) -> bool {
    let first_ok = sheet.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_');
    !first_ok || !sheet.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        // a bare name like `AB12` would read back as a cell reference
        || scan_cell(sheet).is_some_and(|(_, _, n)| n == sheet.len())
}

fn split_sheet(s: &str) -> Result<(Option<String>, &str), AddressError> {
    if let Some(rest) = s.strip_prefix('\'') {
        let end = rest.find("'!").ok_or_else(|| AddressError::Invalid(s.into()))?;
        return Ok((Some(rest[..end].into()), &rest[end + 2..]));
    }
    match s.rfind('!') {
        Some(i) if i > 0 => Ok((Some(s[..i].into()), &s[i + 1..])),
        Some(_) => Err(AddressError::Invalid(s.into())),
        None => Ok((None, s)),
    }
}

/// Scans `[$]LETTERS[$]DIGITS` from the start of `s`, returning (column, row, bytes consumed).
pub(crate) fn scan_cell(s: &str) -> Option<(u32, u32, usize)> {
    let b = s.as_bytes();
    let mut i = 0;
    if b.first() == Some(&b'$') {
        i += 1;
    }
    let (column, n) = scan_letters(&s[i..])?;
    i += n;
    if b.get(i) == Some(&b'$') {
        i += 1;
    }
    let start = i;
    let mut row: u32 = 0;
    while let Some(c) = b.get(i).filter(|c| c.is_ascii_digit()) {
        row = row.checked_mul(10)?.checked_add(u32::from(c - b'0'))?;
        i += 1;
    }
    if i == start || b[start] == b'0' {
        return None;
    }
    Some((column, row, i))
}

/// Scans uppercase-insensitive column letters, returning (column index, bytes consumed).
pub(crate) fn scan_letters(s: &str) -> Option<(u32, usize)> {
    let mut column: u32 = 0;
    let mut n = 0;
    for c in s.bytes() {
        if !c.is_ascii_alphabetic() {
            break;
        }
        column = column
            .checked_mul(26)?
            .checked_add(u32::from(c.to_ascii_uppercase() - b'A' + 1))?;
        n += 1;
        if n > 4 {
            return None;
        }
    }
    (n > 0).then_some((column, n))
}

/// Renders a 1-based column index as letters (`1` → `A`, `27` → `AA`).
pub struct ColumnLetters(pub u32);

impl fmt::Display for ColumnLetters {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut buf = [0u8; 8];
        let mut i = buf.len();
        let mut n = self.0;
        while n > 0 {
            let rem = (n - 1) % 26;
            i -= 1;
            buf[i] = b'A' + rem as u8;
            n = (n - 1) / 26;
        }
        f.write_str(core::str::from_utf8(&buf[i..]).unwrap_or(""))
    }
}

pub fn column_index(letters: &str) -> Option<u32> {
    scan_letters(letters)
        .filter(|&(c, n)| n == letters.len() && c <= MAX_COLUMN)
        .map(|(c, _)| c)
}

/// A rectangle on one sheet, inclusive on both corners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rect {
    pub left: u32,
    pub top: u32,
    pub right: u32,
    pub bottom: u32,
}

impl Rect {
    pub fn intersects(&self, other: &Rect) -> bool {
        self.left <= other.right
            && other.left <= self.right
            && self.top <= other.bottom
            && other.top <= self.bottom
    }

    pub fn contains(&self, column: u32, row: u32) -> bool {
        (self.left..=self.right).contains(&column) && (self.top..=self.bottom).contains(&row)
    }

    /// The rectangle grown by `margin` cells on every side (clamped at the grid origin).
    pub fn expanded(&self, margin: u32) -> Rect {
        Rect {
            left: self.left.saturating_sub(margin).max(1),
            top: self.top.saturating_sub(margin).max(1),
            right: self.right + margin,
            bottom: self.bottom + margin,
        }
    }
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}:{}{}",
            ColumnLetters(self.left),
            self.top,
            ColumnLetters(self.right),
            self.bottom
        )
    }
}
