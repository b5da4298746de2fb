//! Reserved token ids shared by every vocabulary.

pub type Token = u32;

pub const PAD: Token = 0;
pub const BOS: Token = 1;
pub const EOS: Token = 2;
pub const PLH: Token = 3;
pub const UNK: Token = 4;

/// Number of reserved ids; content tokens start here.
pub const NUM_RESERVED: u32 = 5;

/// Ids that may never be produced by the replacement head.
pub const NON_OUTPUT: [Token; 4] = [PAD, BOS, EOS, PLH];

pub fn is_content(t: Token) -> bool {
    t >= NUM_RESERVED
}

/// Surface form used by the sidecar vocabulary file and for display.
pub fn surface(t: Token) -> String {
    match t {
        PAD => "<pad>".into(),
        BOS => "<s>".into(),
        EOS => "</s>".into(),
        PLH => "<plh>".into(),
        UNK => "<unk>".into(),
        t => format!("w{}", t - NUM_RESERVED),
    }
}
