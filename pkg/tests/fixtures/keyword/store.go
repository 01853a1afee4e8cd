package store

import (
	"fmt"
	"log"
	"net"
)

func storeItem(id string) {
	if err := persist(id); err != nil {
		log.Errorf("store error: %v", err)
	}
}

func persist(id string) error {
	if err := openConn(); err != nil {
		return err
	}
	return writeRow(id)
}

func openConn() error {
	if _, err := net.Dial("tcp", "db:5432"); err != nil {
		return fmt.Errorf("failed to connect to db: %w", err)
	}
	return nil
}

func writeRow(id string) error {
	if _, err := conn.Exec("INSERT", id); err != nil {
		return fmt.Errorf("failed to write to db: %w", err)
	}
	return nil
}
