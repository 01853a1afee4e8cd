package main

import (
	"errors"
	"fmt"
	"log"
	"os"
	"strconv"
)

func main() {
	if err := runApp("settings.txt"); err != nil {
		log.Errorf("Error: %v", err)
	}
}

func runApp(path string) error {
	content, err := LoadFile(path)
	if err != nil {
		return fmt.Errorf("application setup failed: %w", err)
	}
	if _, err := ProcessData(content); err != nil {
		return fmt.Errorf("application setup failed: %w", err)
	}
	return nil
}

func LoadFile(path string) (string, error) {
	data, err := os.ReadFile(path)
	if err != nil {
		return "", fmt.Errorf("could not read config file '%s': %w", path, err)
	}
	if len(data) == 0 {
		return "", errors.New("config file is empty")
	}
	return string(data), nil
}

func ProcessData(content string) (int, error) {
	value, err := strconv.Atoi(content)
	if err != nil {
		return 0, fmt.Errorf("could not parse config value: %w", err)
	}
	return value, nil
}
