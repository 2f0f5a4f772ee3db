use crate::value::DataItem;

/// One appended message.
#[derive(Clone, Debug, PartialEq)]
pub struct QueueRecord {
    pub items: Vec<DataItem>,
    /// Last record of the producer's stream.
    pub eos: bool,
}

#[derive(Clone, Debug, Default)]
struct Partition {
    log: Vec<QueueRecord>,
    /// Next offset handed to the consumer.
    read: u64,
    /// Every offset below this one has been fully processed.
    committed: u64,
}

/// Append-only partitioned log with one consumer per partition and a
/// committed offset per partition.
#[derive(Clone, Debug)]
pub struct DurableQueue {
    id: String,
    partitions: Vec<Partition>,
}

impl DurableQueue {
    pub fn new(id: impl Into<String>, partitions: usize) -> Self {
        DurableQueue { id: id.into(), partitions: vec![Partition::default(); partitions] }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn partitions(&self) -> usize {
        self.partitions.len()
    }

    /// Adds a partition and returns its index.
    pub fn add_partition(&mut self) -> usize {
        self.partitions.push(Partition::default());
        self.partitions.len() - 1
    }

    /// Appends to a partition and returns the record's offset.
    pub fn append(&mut self, partition: usize, record: QueueRecord) -> u64 {
        let p = &mut self.partitions[partition];
        p.log.push(record);
        p.log.len() as u64 - 1
    }

    /// Hands out the next unread record.
    pub fn poll(&mut self, partition: usize) -> Option<(u64, &QueueRecord)> {
        let p = &mut self.partitions[partition];
        let offset = p.read;
        let record = p.log.get(offset as usize)?;
        p.read += 1;
        Some((offset, record))
    }

    /// Marks every record up to and including `offset` as processed.
    ///
    /// # Panics
    /// If `offset` was never polled.
    pub fn commit(&mut self, partition: usize, offset: u64) {
        let p = &mut self.partitions[partition];
        assert!(offset < p.read, "commit of unread offset {offset} on {}[{partition}]", self.id);
        p.committed = p.committed.max(offset + 1);
    }

    /// Moves the read position back to the committed offset, so unprocessed
    /// records are handed out again.
    pub fn rewind(&mut self, partition: usize) {
        let p = &mut self.partitions[partition];
        p.read = p.committed;
    }

    pub fn len(&self, partition: usize) -> u64 {
        self.partitions[partition].log.len() as u64
    }

    pub fn committed(&self, partition: usize) -> u64 {
        self.partitions[partition].committed
    }

    pub fn backlog(&self, partition: usize) -> u64 {
        let p = &self.partitions[partition];
        p.log.len() as u64 - p.read
    }

    pub fn appended_messages(&self) -> u64 {
        self.partitions.iter().map(|p| p.log.len() as u64).sum()
    }

    pub fn appended_items(&self) -> u64 {
        self.partitions.iter().flat_map(|p| &p.log).map(|r| r.items.len() as u64).sum()
    }

    pub fn committed_items(&self) -> u64 {
        self.partitions
            .iter()
            .flat_map(|p| &p.log[..p.committed as usize])
            .map(|r| r.items.len() as u64)
            .sum()
    }
}
