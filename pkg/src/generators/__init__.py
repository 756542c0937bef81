# Report and event-log generators
