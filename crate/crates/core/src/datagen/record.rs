use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! customer_record {
    ($( $field:ident => $column:literal ),* $(,)?) => {
        /// One cardholder: pretreatment features, the observed dosage and the
        /// expected profit before (`ep_m3`) and after (`ep_m6`) the decision.
        #[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
        pub struct CustomerRecord {
            pub id: u64,
            $( pub $field: f64, )*
        }

        /// CSV header, in file order.
        pub const COLUMNS: &[&str] = &["id", $( $column ),*];

        impl CustomerRecord {
            fn numeric_values(&self) -> Vec<f64> {
                vec![$( self.$field ),*]
            }

            fn from_numeric(id: u64, v: &[f64]) -> Self {
                let mut it = v.iter().copied();
                Self {
                    id,
                    $( $field: it.next().expect("column count checked"), )*
                }
            }
        }
    };
}

customer_record! {
    bureau_score => "bureau_score",
    est_income => "est_income",
    interest_rate => "interest_rate",
    months_on_book => "months_on_book",
    limit_m3 => "limit_m3",
    limit_m6 => "limit_m6",
    avg_balance => "avg_balance",
    avg_consumption => "avg_consumption",
    balance_m1 => "balance_m1",
    balance_m2 => "balance_m2",
    balance_m3 => "balance_m3",
    cons_in_m1 => "cons_in_m1",
    cons_in_m2 => "cons_in_m2",
    cons_in_m3 => "cons_in_m3",
    cons_out_m1 => "cons_out_m1",
    cons_out_m2 => "cons_out_m2",
    cons_out_m3 => "cons_out_m3",
    fees_avg_m1 => "fees_avg_m1",
    fees_avg_m2 => "fees_avg_m2",
    fees_avg_m3 => "fees_avg_m3",
    fees_max_m1 => "fees_max_m1",
    fees_max_m2 => "fees_max_m2",
    fees_max_m3 => "fees_max_m3",
    fees_min_m1 => "fees_min_m1",
    fees_min_m2 => "fees_min_m2",
    fees_min_m3 => "fees_min_m3",
    txn_m1 => "txn_m1",
    txn_m2 => "txn_m2",
    txn_m3 => "txn_m3",
    max_unpaid_life => "max_unpaid_life",
    unpaid_m1_m3 => "unpaid_m1_m3",
    pd_m3 => "pd_m3",
    pd_m6 => "pd_m6",
    observed_dosage => "observed_dosage",
    ep_m3 => "ep_m3",
    ep_m6 => "ep_m6",
}

/// Names of the columns returned by [`CustomerRecord::features`].
pub const FEATURE_NAMES: &[&str] = &[
    "bureau_score",
    "est_income",
    "interest_rate",
    "months_on_book",
    "limit_m3",
    "avg_balance",
    "avg_consumption",
    "balance_m1",
    "balance_m2",
    "balance_m3",
    "cons_in_m1",
    "cons_in_m2",
    "cons_in_m3",
    "cons_out_m1",
    "cons_out_m2",
    "cons_out_m3",
    "fees_avg_m1",
    "fees_avg_m2",
    "fees_avg_m3",
    "fees_max_m1",
    "fees_max_m2",
    "fees_max_m3",
    "fees_min_m1",
    "fees_min_m2",
    "fees_min_m3",
    "txn_m1",
    "txn_m2",
    "txn_m3",
    "max_unpaid_life",
    "unpaid_m1_m3",
    "pd_m3",
    "ep_m3",
];

impl CustomerRecord {
    /// Pretreatment covariates. Month-6 columns and the dosage are excluded;
    /// the pretreatment outcome `ep_m3` is included.
    pub fn features(&self) -> Vec<f64> {
        vec![
            self.bureau_score,
            self.est_income,
            self.interest_rate,
            self.months_on_book,
            self.limit_m3,
            self.avg_balance,
            self.avg_consumption,
            self.balance_m1,
            self.balance_m2,
            self.balance_m3,
            self.cons_in_m1,
            self.cons_in_m2,
            self.cons_in_m3,
            self.cons_out_m1,
            self.cons_out_m2,
            self.cons_out_m3,
            self.fees_avg_m1,
            self.fees_avg_m2,
            self.fees_avg_m3,
            self.fees_max_m1,
            self.fees_max_m2,
            self.fees_max_m3,
            self.fees_min_m1,
            self.fees_min_m2,
            self.fees_min_m3,
            self.txn_m1,
            self.txn_m2,
            self.txn_m3,
            self.max_unpaid_life,
            self.unpaid_m1_m3,
            self.pd_m3,
            self.ep_m3,
        ]
    }

    /// Checks the record invariants; the error names the offending column.
    pub fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        for (col, v) in COLUMNS[1..].iter().zip(self.numeric_values()) {
            if !v.is_finite() {
                return Err((col, format!("value {v} is not finite")));
            }
        }
        for (col, p) in [("pd_m3", self.pd_m3), ("pd_m6", self.pd_m6)] {
            if !(0.0..=1.0).contains(&p) {
                return Err((col, format!("probability {p} outside [0, 1]")));
            }
        }
        if !(self.interest_rate > 0.0 && self.interest_rate < 1.0) {
            return Err(("interest_rate", format!("{} outside (0, 1)", self.interest_rate)));
        }
        for (col, l) in [("limit_m3", self.limit_m3), ("limit_m6", self.limit_m6)] {
            if l <= 0.0 {
                return Err((col, format!("limit {l} must be positive")));
            }
        }
        if self.observed_dosage < 0.0 {
            return Err(("observed_dosage", format!("negative dosage {}", self.observed_dosage)));
        }
        Ok(())
    }
}

pub(crate) fn to_row(r: &CustomerRecord) -> Vec<String> {
    std::iter::once(r.id.to_string())
        .chain(r.numeric_values().into_iter().map(|v| v.to_string()))
        .collect()
}

pub(crate) fn from_row(row: usize, fields: &csv::StringRecord) -> Result<CustomerRecord> {
    let cell = |col: usize, message: String| Error::Cell {
        row,
        column: COLUMNS[col].to_string(),
        message,
    };
    let id_raw = fields.get(0).unwrap_or("").trim();
    let id = id_raw
        .parse::<u64>()
        .map_err(|_| cell(0, format!("cannot parse `{id_raw}` as an identifier")))?;
    let mut values = Vec::with_capacity(COLUMNS.len() - 1);
    for col in 1..COLUMNS.len() {
        let raw = fields.get(col).unwrap_or("").trim();
        let v = raw
            .parse::<f64>()
            .map_err(|_| cell(col, format!("cannot parse `{raw}` as a number")))?;
        values.push(v);
    }
    let rec = CustomerRecord::from_numeric(id, &values);
    rec.validate().map_err(|(column, message)| Error::Cell {
        row,
        column: column.to_string(),
        message,
    })?;
    Ok(rec)
}
