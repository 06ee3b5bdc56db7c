from opencqed.writer.writer import document_to_string, table_to_string, write_document, write_table

__all__ = ["document_to_string", "table_to_string", "write_document", "write_table"]
